#pragma once

#include <nlohmann/json.hpp>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ndec/error.hpp"
#include "ndec/features.hpp"
#include "ndec/filters.hpp"
#include "ndec/metrics.hpp"
#include "ndec/model.hpp"
#include "ndec/nn.hpp"
#include "ndec/train.hpp"

namespace ndec {

// --- operation and memory cost ---------------------------------------------

/// Per-inference averages from an instrumented forward pass.
struct CostProfile {
  double macs = 0;
  double acs = 0;
  double aux_fetches = 0;
  double act_sparsity = 0;
  std::size_t inferences = 0;
  std::vector<LayerActivity> layers;  // totals over all inferences
};

inline CostProfile summarize(const OpCounter& oc) {
  CostProfile p;
  p.inferences = oc.inferences;
  p.layers = oc.layers;
  if (oc.inferences == 0) return p;
  const double n = static_cast<double>(oc.inferences);
  p.macs = oc.macs / n;
  p.acs = oc.acs / n;
  p.aux_fetches = oc.aux_fetches / n;
  p.act_sparsity = oc.activations > 0 ? oc.zero_activations / oc.activations : 0.0;
  return p;
}

/// Runs the model over the given reaches (one state reset, chronological).
inline CostProfile count_operations(Model& model, const FeatureSeries& f,
                                    const ReachBoundaries& reaches) {
  OpCounter oc;
  predict(model, f, reaches, &oc);
  reset_state(model);
  return summarize(oc);
}

/// Runs the model over every record of the series.
inline CostProfile count_operations(Model& model, const FeatureSeries& f) {
  ReachBoundaries all;
  if (f.n_records > 0) all.push_back(0, f.n_records);
  return count_operations(model, f, all);
}

/// Weight fetches per inference: each layer reads the weights of its nonzero
/// inputs, plus the per-neuron parameter reads of normalization and updates.
/// `sparsity` overrides the measured per-layer zero fraction when given.
inline double estimate_memory_access(const CostProfile& p,
                                     std::span<const double> sparsity = {}) {
  require(sparsity.empty() || sparsity.size() == p.layers.size(), ErrorCode::ShapeMismatch,
          "one sparsity value per counted layer expected");
  if (p.inferences == 0) return 0.0;
  double total = p.aux_fetches;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    const double s = sparsity.empty() ? 1.0 - layer.nonzero_fraction() : sparsity[l];
    require(s >= 0 && s <= 1, ErrorCode::InvalidArgument, "sparsity must lie in [0,1]");
    const double uses = layer.uses / static_cast<double>(p.inferences);
    total += (1.0 - s) * static_cast<double>(layer.weights()) * uses;
  }
  return total;
}

/// 32-bit storage of every learnable parameter and running statistic.
inline std::size_t model_size_bytes(const Model& m) {
  return 4 * (parameter_count(m) + buffer_count(m));
}

inline double bytes_to_kb(std::size_t bytes) { return static_cast<double>(bytes) / 1024.0; }

// --- latency -----------------------------------------------------------------

inline constexpr double kStrideMs = 4.0;

struct LatencyEstimate {
  double latency_ms = kStrideMs;
  bool realtime = true;
};

/// Total latency = stride + compute time + filter delay; bidirectional
/// filtering needs the whole recording and is offline only.
inline LatencyEstimate latency_estimate(const std::optional<FilterSpec>& filter,
                                        double compute_ms = 0.0) {
  LatencyEstimate e{kStrideMs + compute_ms, true};
  if (!filter) return e;
  switch (filter->mode) {
    case FilterMode::Forward:
      break;
    case FilterMode::Bid:
      e.realtime = false;
      e.latency_ms = std::numeric_limits<double>::infinity();
      break;
    case FilterMode::BlockBid:
      e.latency_ms += static_cast<double>(filter->block_window / 2) * kStrideMs;
      break;
  }
  return e;
}

// --- reports -------------------------------------------------------------------

inline std::string filter_label(const std::optional<FilterSpec>& f) {
  if (!f) return "none";
  std::ostringstream os;
  os << to_string(f->mode) << ":o" << f->order << ":c" << f->cutoff;
  if (f->mode == FilterMode::BlockBid) os << ":w" << f->block_window;
  return os.str();
}

struct BenchReport {
  std::string model;
  std::string filter = "none";
  double r2 = 0;
  double macs = 0;
  double acs = 0;
  double mem_accesses = 0;
  double act_sparsity = 0;
  std::size_t parameters = 0;
  std::size_t footprint_bytes = 0;
  double latency_ms = kStrideMs;
  bool realtime = true;

  double ops() const { return macs + acs; }
  double footprint_kb() const { return bytes_to_kb(footprint_bytes); }

  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

inline void to_json(nlohmann::json& j, const BenchReport& r) {
  j = nlohmann::json{{"model", r.model},
                     {"filter", r.filter},
                     {"r2", r.r2},
                     {"macs", r.macs},
                     {"acs", r.acs},
                     {"mem_accesses", r.mem_accesses},
                     {"act_sparsity", r.act_sparsity},
                     {"parameters", r.parameters},
                     {"footprint_bytes", r.footprint_bytes},
                     {"footprint_kb", r.footprint_kb()},
                     {"realtime", r.realtime}};
  // JSON has no infinity; an offline estimate is written as null.
  j["latency_ms"] = r.realtime ? nlohmann::json(r.latency_ms) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, BenchReport& r) {
  j.at("model").get_to(r.model);
  j.at("filter").get_to(r.filter);
  j.at("r2").get_to(r.r2);
  j.at("macs").get_to(r.macs);
  j.at("acs").get_to(r.acs);
  j.at("mem_accesses").get_to(r.mem_accesses);
  j.at("act_sparsity").get_to(r.act_sparsity);
  j.at("parameters").get_to(r.parameters);
  j.at("footprint_bytes").get_to(r.footprint_bytes);
  j.at("realtime").get_to(r.realtime);
  r.latency_ms = j.at("latency_ms").is_null() ? std::numeric_limits<double>::infinity()
                                               : j.at("latency_ms").get<double>();
}

inline void write_report_csv_header(std::ostream& os) {
  os << "model,filter,r2,macs,acs,mem_accesses,act_sparsity,parameters,footprint_bytes,"
        "footprint_kb,latency_ms,realtime\n";
}

inline void write_report_csv_row(std::ostream& os, const BenchReport& r) {
  os.precision(10);
  os << r.model << ',' << r.filter << ',' << r.r2 << ',' << r.macs << ',' << r.acs << ','
     << r.mem_accesses << ',' << r.act_sparsity << ',' << r.parameters << ','
     << r.footprint_bytes << ',' << r.footprint_kb() << ',';
  if (r.realtime) os << r.latency_ms;
  os << ',' << (r.realtime ? "true" : "false") << '\n';
}

/// Cost-only report fields of a model over a set of reaches.
inline BenchReport cost_report(Model& model, const FeatureSeries& f,
                               const ReachBoundaries& reaches) {
  const CostProfile p = count_operations(model, f, reaches);
  BenchReport r;
  r.model = std::string(to_string(model.arch));
  r.macs = p.macs;
  r.acs = p.acs;
  r.mem_accesses = estimate_memory_access(p);
  r.act_sparsity = p.act_sparsity;
  r.parameters = parameter_count(model);
  r.footprint_bytes = model_size_bytes(model);
  return r;
}

/// Test-set report. The filter, if any, runs over the concatenated test
/// predictions; its order and cutoff come from the caller.
inline BenchReport evaluate(Model& model, const Session& s, const FeatureSeries& f,
                            const ReachBoundaries& test, const std::optional<FilterSpec>& filter) {
  BenchReport r = cost_report(model, f, test);
  Mat pred = predict(model, f, test);
  reset_state(model);
  if (filter) pred = apply_filter(pred, *filter);
  r.r2 = r2_score(pred, labels_at(s, test.sample_indices()));
  r.filter = filter_label(filter);
  const LatencyEstimate lat = latency_estimate(filter);
  r.latency_ms = lat.latency_ms;
  r.realtime = lat.realtime;
  return r;
}

/// Grid-searches order and cutoff for `mode` on validation predictions.
inline FilterGridResult select_filter(Model& model, const Session& s, const FeatureSeries& f,
                                      const ReachBoundaries& val, FilterMode mode) {
  const Mat pred = predict(model, f, val);
  reset_state(model);
  return filter_grid_search(pred, labels_at(s, val.sample_indices()), mode);
}

}  // namespace ndec
