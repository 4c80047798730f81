#pragma once

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ndec/bench.hpp"
#include "ndec/checkpoint.hpp"
#include "ndec/config.hpp"
#include "ndec/features.hpp"
#include "ndec/filters.hpp"
#include "ndec/model.hpp"
#include "ndec/pareto.hpp"
#include "ndec/reaches.hpp"
#include "ndec/session_io.hpp"
#include "ndec/sweep.hpp"
#include "ndec/synth.hpp"
#include "ndec/train.hpp"

namespace ndec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kOutEnv = "NDEC_OUT";

// --- run directories and manifests ------------------------------------------

class Run {
 public:
  Run(std::string command, fs::path dir) : command_(std::move(command)), dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return dir_ / name;
  }

  void input(const fs::path& p) { inputs_.push_back({{"path", p.string()}, {"hash", content_hash(p)}}); }

  void write_manifest(const std::string& config, std::uint64_t seed) const {
    json m{{"command", command_},
           {"config", config},
           {"seed", seed},
           {"inputs", inputs_},
           {"outputs", outputs_}};
    std::ofstream os(dir_ / "manifest.json");
    os << m.dump(2) << '\n';
    require(static_cast<bool>(os), ErrorCode::Io, "cannot write manifest");
  }

 private:
  std::string command_;
  fs::path dir_;
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
};

/// Explicit run directory, or <root>/<command>-<timestamp> where root comes
/// from --out-root, then NDEC_OUT, then ./ndec_runs.
inline fs::path resolve_run_dir(const std::string& command, const std::string& run_dir,
                                const std::string& out_root) {
  if (!run_dir.empty()) return run_dir;
  fs::path root = out_root;
  if (root.empty()) {
    const char* env = std::getenv(kOutEnv);
    root = env && *env ? fs::path(env) : fs::path("ndec_runs");
  }
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << command << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
  fs::path dir = root / stamp.str();
  for (int i = 1; fs::exists(dir); ++i) dir = root / (stamp.str() + "-" + std::to_string(i));
  return dir;
}

template <class F>
void write_file(const fs::path& p, F&& body) {
  std::ofstream os(p, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + p.string());
  os.precision(10);
  body(os);
  require(static_cast<bool>(os), ErrorCode::Io, "write failed: " + p.string());
}

inline void write_json(const fs::path& p, const json& j) {
  write_file(p, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

// --- shared option groups ------------------------------------------------------

struct ModelOptions {
  std::string arch = "ann";
  bool tiny = false;
  std::size_t n1 = 0, n2 = 0, n_lstm = 0;
  std::uint64_t model_seed = 0;

  void bind(CLI::App* app) {
    app->add_option("--model", arch, "ann, ann_3d, snn_3d, snn_streaming or lstm")->capture_default_str();
    app->add_flag("--tiny", tiny, "use the tiny layer sizes");
    app->add_option("--n1", n1, "first hidden layer width (overrides base/tiny)");
    app->add_option("--n2", n2, "second hidden layer width (overrides base/tiny)");
    app->add_option("--n-lstm", n_lstm, "LSTM hidden size");
    app->add_option("--model-seed", model_seed, "weight initialization seed")->capture_default_str();
  }

  Model build(std::size_t n_probes) const {
    const Arch a = parse_arch(arch);
    LayerShape s = tiny ? LayerShape::tiny(a, n_probes) : LayerShape::base(n_probes);
    if (n1) s.n1 = n1;
    if (n2) s.n2 = n2;
    if (n_lstm) s.n_lstm = n_lstm;
    return make_model(a, s, model_seed, default_features(a));
  }
};

struct TrainOptions {
  TrainConfig cfg;
  std::string config_file;
  std::map<const CLI::App*, std::vector<CLI::Option*>> flags;  // per subcommand

  void bind(CLI::App* app) {
    app->add_option("--train-config", config_file, "key = value training config file")
        ->check(CLI::ExistingFile);
    flags[app] = {app->add_option("--epochs", cfg.epochs)->capture_default_str(),
             app->add_option("--lr", cfg.learning_rate)->capture_default_str(),
             app->add_option("--dropout", cfg.dropout)->capture_default_str(),
             app->add_option("--weight-decay", cfg.weight_decay)->capture_default_str(),
             app->add_option("--l2", cfg.l2_loss, "explicit L2 penalty added to the loss")
                 ->capture_default_str(),
             app->add_option("--batch", cfg.batch_size)->capture_default_str(),
             app->add_option("--seed", cfg.seed, "training seed (shuffling, dropout)")
                 ->capture_default_str()};
  }

  /// Values from --train-config, overridden by flags given on the command line.
  void resolve(const CLI::App* cmd) {
    if (config_file.empty() || !flags.count(cmd)) return;
    const TrainConfig file = load_train_config(config_file);
    const TrainConfig given = cfg;
    cfg = file;
    auto keep = [&](std::size_t i, auto member) {
      if (flags.at(cmd)[i]->count() > 0) cfg.*member = given.*member;
    };
    keep(0, &TrainConfig::epochs);
    keep(1, &TrainConfig::learning_rate);
    keep(2, &TrainConfig::dropout);
    keep(3, &TrainConfig::weight_decay);
    keep(4, &TrainConfig::l2_loss);
    keep(5, &TrainConfig::batch_size);
    keep(6, &TrainConfig::seed);
  }
};

struct SplitOptions {
  int split = 50;
  std::size_t kfold = 0;
  std::size_t fold = 0;
  bool remove_long_test = false;
  double max_reach = 8.0;

  void bind(CLI::App* app, bool with_kfold_loop) {
    app->add_option("--split", split, "contiguous split: 50 (50/25/25) or 80 (80/10/10)")
        ->check(CLI::IsMember({50, 80}))
        ->capture_default_str();
    app->add_option("--kfold", kfold, with_kfold_loop ? "run k-fold cross-validation"
                                                      : "use fold --fold of a k-fold split");
    if (!with_kfold_loop) app->add_option("--fold", fold)->capture_default_str();
    app->add_flag("--remove-long-test", remove_long_test, "also drop long reaches from the test set");
    app->add_option("--max-reach", max_reach, "longest reach kept, seconds")->capture_default_str();
  }

  SplitSpec spec(std::size_t fold_index) const {
    SplitSpec s = split == 80 ? SplitSpec::eighty() : SplitSpec::fifty();
    if (kfold) s = SplitSpec::kfold(kfold, fold_index);
    s.max_reach_seconds = max_reach;
    s.remove_long_from_test = remove_long_test;
    validate(s);
    return s;
  }
};

struct FilterOptions {
  std::string mode = "none";
  int order = 0;
  double cutoff = 0;
  std::size_t block_window = 16;

  void bind(CLI::App* app) {
    app->add_option("--filter", mode, "none, fwd, bid or blockbid")
        ->check(CLI::IsMember({"none", "fwd", "bid", "blockbid"}))
        ->capture_default_str();
    app->add_option("--order", order, "filter order; searched on validation when omitted");
    app->add_option("--cutoff", cutoff, "cutoff (fraction of Nyquist); searched when omitted");
    app->add_option("--block-window", block_window)->capture_default_str();
  }
};

inline FilterMode parse_filter_mode(const std::string& s) {
  if (s == "fwd") return FilterMode::Forward;
  if (s == "bid") return FilterMode::Bid;
  if (s == "blockbid") return FilterMode::BlockBid;
  throw Error(ErrorCode::InvalidArgument, "unknown filter mode '" + s + "'");
}

inline void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& h) {
  os << "epoch,lr,train_loss,val_r2\n";
  for (const auto& e : h) os << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.val_r2 << '\n';
}

inline void write_pareto_csv(std::ostream& os, const std::vector<ParetoPoint>& pts,
                             const std::vector<std::string>& filters) {
  os << "cost,r2,label,filter\n";
  for (std::size_t i = 0; i < pts.size(); ++i)
    os << pts[i].cost << ',' << pts[i].accuracy << ',' << pts[i].id << ',' << filters[i] << '\n';
}

// --- commands --------------------------------------------------------------------

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool verbose = false;
};

/// Trains (or loads) a model for one split and returns it with its split.
struct Fitted {
  Model model;
  ReachSplit split;
  TrainResult result;
  bool trained = false;
};

inline Fitted fit(const Session& s, const ModelOptions& mo,
                  const TrainOptions& to, const SplitSpec& spec, const std::string& checkpoint,
                  Context& ctx) {
  Fitted out{mo.build(s.n_probes), prepare_splits(s, spec), {}, false};
  if (!checkpoint.empty()) {
    out.model = load_checkpoint(checkpoint);
    require(out.model.shape.n_probes == s.n_probes, ErrorCode::ShapeMismatch,
            "checkpoint probe count does not match the session");
    return out;
  }
  out.result = train(out.model, s, out.split, to.cfg);
  if (ctx.verbose)
    for (const auto& e : out.result.history)
      ctx.err << "epoch " << e.epoch << " loss " << e.train_loss << " val_r2 " << e.val_r2 << '\n';
  if (out.result.diverged) throw Error(ErrorCode::NumericalFault, out.result.message);
  out.model = out.result.model;
  out.trained = true;
  return out;
}

inline void cmd_synth(Run& run, const SynthConfig& cfg, Context& ctx) {
  const fs::path p = run.output("session.ndec");
  save_session(synth_session(cfg), p);
  ctx.out << p.string() << '\n';
}

inline void cmd_segment(Run& run, const Session& s, double max_reach, Context& ctx) {
  const ReachBoundaries b = segment_reaches(s);
  std::size_t n_long = 0;
  double total = 0, longest = 0;
  write_file(run.output("reaches.csv"), [&](std::ostream& os) {
    os << "reach,start,end,samples,seconds,long\n";
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double sec = static_cast<double>(b.length(i)) * s.period();
      const bool is_long = sec > max_reach;
      n_long += is_long;
      total += sec;
      longest = std::max(longest, sec);
      os << i << ',' << b.starts[i] << ',' << b.ends[i] << ',' << b.length(i) << ',' << sec << ','
         << (is_long ? 1 : 0) << '\n';
    }
  });
  const json summary{{"n_reaches", b.size()},
                     {"n_long", n_long},
                     {"max_reach_seconds", max_reach},
                     {"samples", s.n_samples()},
                     {"mean_reach_seconds", b.empty() ? 0.0 : total / static_cast<double>(b.size())},
                     {"longest_reach_seconds", longest}};
  write_json(run.output("segment.json"), summary);
  ctx.out << "reaches: " << b.size() << " (long: " << n_long << ")\n";
}

inline void cmd_train(Run& run, const Session& s, const ModelOptions& mo, const TrainOptions& to,
                      const SplitOptions& so, Context& ctx) {
  const SplitSpec spec = so.spec(so.fold);
  Model m = mo.build(s.n_probes);
  const FeatureSeries f = extract_features(s, m.features);
  const ReachSplit split = prepare_splits(s, spec);
  TrainResult r = train(std::move(m), s, f, split, to.cfg);
  write_file(run.output("history.csv"), [&](std::ostream& os) { write_history_csv(os, r.history); });
  if (r.diverged) throw Error(ErrorCode::NumericalFault, "training diverged: " + r.message);
  const fs::path ckpt = run.output("model.ndck");
  save_checkpoint(r.model, ckpt);
  write_file(run.output("train_config.txt"), [&](std::ostream& os) { write_train_config(os, to.cfg); });
  // Report the stored (32-bit) model, which is what later commands load.
  Model stored = load_checkpoint(ckpt);
  const double test_r2 = evaluate_r2(stored, f, s, split.test);
  const json info{{"model", to_string(r.model.arch)},
                  {"parameters", parameter_count(r.model)},
                  {"best_epoch", r.best_epoch},
                  {"best_val_r2", r.history.at(static_cast<std::size_t>(r.best_epoch)).val_r2},
                  {"test_r2", test_r2},
                  {"seed", to.cfg.seed},
                  {"model_seed", mo.model_seed}};
  write_json(run.output("train.json"), info);
  ctx.out << to_string(r.model.arch) << " best epoch " << r.best_epoch << ", test R2 " << test_r2
          << '\n';
}

/// One evaluation (single split or one fold).
inline json eval_once(const Session& s, const ModelOptions& mo, const TrainOptions& to,
                      const SplitSpec& spec, const FilterOptions& fo, const std::string& checkpoint,
                      BenchReport& report, Context& ctx) {
  Fitted fitted = fit(s, mo, to, spec, checkpoint, ctx);
  Model& m = fitted.model;
  const FeatureSeries f = extract_features(s, m.features);
  json extra;
  std::optional<FilterSpec> filter;
  if (fo.mode != "none") {
    const FilterMode mode = parse_filter_mode(fo.mode);
    if (fo.order > 0 && fo.cutoff > 0) {
      filter = FilterSpec{fo.order, fo.cutoff, mode, fo.block_window};
    } else {
      static constexpr int kOrders[] = {1, 2, 3, 4};
      const auto cutoffs = default_cutoff_grid();
      const Mat pred = predict(m, f, fitted.split.val);
      reset_state(m);
      const auto g = filter_grid_search(pred, labels_at(s, fitted.split.val.sample_indices()), mode,
                                        kOrders, cutoffs, fo.block_window);
      filter = g.best;
      extra["filter_val_r2"] = g.best_r2;
    }
    validate(*filter);
  }
  extra["unfiltered_r2"] = evaluate(m, s, f, fitted.split.test, std::nullopt).r2;
  report = evaluate(m, s, f, fitted.split.test, filter);
  if (fitted.trained) extra["best_epoch"] = fitted.result.best_epoch;
  extra["test_reaches"] = fitted.split.test.size();
  return extra;
}

inline void cmd_eval(Run& run, const Session& s, const ModelOptions& mo, const TrainOptions& to,
                     const SplitOptions& so, const FilterOptions& fo, const std::string& checkpoint,
                     Context& ctx) {
  const std::size_t folds = so.kfold ? so.kfold : 1;
  std::vector<BenchReport> reports;
  json details = json::array();
  for (std::size_t k = 0; k < folds; ++k) {
    BenchReport r;
    details.push_back(eval_once(s, mo, to, so.spec(k), fo, checkpoint, r, ctx));
    reports.push_back(r);
  }
  BenchReport mean = reports.front();
  if (folds > 1) {
    auto avg = [&](auto field) {
      double acc = 0;
      for (const auto& r : reports) acc += r.*field;
      return acc / static_cast<double>(reports.size());
    };
    mean.r2 = avg(&BenchReport::r2);
    mean.macs = avg(&BenchReport::macs);
    mean.acs = avg(&BenchReport::acs);
    mean.mem_accesses = avg(&BenchReport::mem_accesses);
    mean.act_sparsity = avg(&BenchReport::act_sparsity);
    write_file(run.output("folds.csv"), [&](std::ostream& os) {
      write_report_csv_header(os);
      for (const auto& r : reports) write_report_csv_row(os, r);
    });
  }
  json j = mean;
  j["split"] = so.kfold ? "kfold" + std::to_string(so.kfold) : std::to_string(so.split);
  j["remove_long_test"] = so.remove_long_test;
  j["runs"] = details;
  write_json(run.output("report.json"), j);
  write_file(run.output("report.csv"), [&](std::ostream& os) {
    write_report_csv_header(os);
    write_report_csv_row(os, mean);
  });
  ctx.out << mean.model << " filter " << mean.filter << ": R2 " << mean.r2 << ", MACs " << mean.macs
          << ", ACs " << mean.acs << ", latency ";
  if (mean.realtime)
    ctx.out << mean.latency_ms << " ms\n";
  else
    ctx.out << "offline\n";
}

inline void cmd_filtergrid(Run& run, const Session& s, const ModelOptions& mo,
                           const TrainOptions& to, const SplitOptions& so,
                           const std::vector<std::string>& modes, std::size_t block_window,
                           const std::string& checkpoint, Context& ctx) {
  Fitted fitted = fit(s, mo, to, so.spec(so.fold), checkpoint, ctx);
  Model& m = fitted.model;
  const FeatureSeries f = extract_features(s, m.features);
  const Mat pred = predict(m, f, fitted.split.val);
  const Mat labels = labels_at(s, fitted.split.val.sample_indices());
  static constexpr int kOrders[] = {1, 2, 3, 4};
  const auto cutoffs = default_cutoff_grid();
  json best = json::object();
  std::vector<std::pair<std::string, FilterGridResult>> results;
  for (const auto& name : modes)
    results.emplace_back(name, filter_grid_search(pred, labels, parse_filter_mode(name), kOrders,
                                                  cutoffs, block_window));
  write_file(run.output("filtergrid.csv"), [&](std::ostream& os) {
    os << "mode,order,cutoff,val_r2\n";
    for (const auto& [name, g] : results)
      for (const auto& c : g.table) os << name << ',' << c.order << ',' << c.cutoff << ',' << c.r2 << '\n';
  });
  for (const auto& [name, g] : results) {
    best[name] = {{"order", g.best.order}, {"cutoff", g.best.cutoff}, {"val_r2", g.best_r2}};
    write_file(run.output("sos_" + name + ".csv"),
               [&](std::ostream& os) { write_sos_csv(os, design_bessel(g.best.order, g.best.cutoff)); });
    ctx.out << name << ": order " << g.best.order << ", cutoff " << g.best.cutoff << ", val R2 "
            << g.best_r2 << '\n';
  }
  best["unfiltered_val_r2"] = r2_score(pred, labels);
  write_json(run.output("filtergrid.json"), best);
}

inline void cmd_pareto(Run& run, const fs::path& reports_dir, const std::string& cost,
                       Context& ctx) {
  require(fs::is_directory(reports_dir), ErrorCode::Io, "not a directory: " + reports_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(reports_dir))
    if (e.is_regular_file() && e.path().filename() == "report.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::InsufficientData, "no report.json under " + reports_dir.string());
  std::vector<ParetoPoint> points;
  std::map<std::string, std::string> filter_of;
  for (const auto& p : files) {
    std::ifstream is(p);
    BenchReport r = json::parse(is).get<BenchReport>();
    run.input(p);
    const double c = cost == "mem" ? r.mem_accesses
                     : cost == "size" ? static_cast<double>(r.footprint_bytes)
                                      : r.ops();
    const std::string id = r.model + "@" + fs::relative(p.parent_path(), reports_dir).string();
    filter_of[id] = r.filter;
    points.push_back({c, r.r2, id});
  }
  auto filters = [&](const std::vector<ParetoPoint>& pts) {
    std::vector<std::string> out;
    for (const auto& p : pts) out.push_back(filter_of[p.id]);
    return out;
  };
  const auto front = pareto_front(points);
  write_file(run.output("points.csv"), [&](std::ostream& os) { write_pareto_csv(os, points, filters(points)); });
  write_file(run.output("pareto.csv"), [&](std::ostream& os) { write_pareto_csv(os, front, filters(front)); });
  ctx.out << front.size() << " of " << points.size() << " reports on the front\n";
}

inline std::vector<std::pair<std::size_t, std::size_t>> parse_grid(const std::string& spec) {
  std::vector<std::pair<std::size_t, std::size_t>> grid;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    require(x != std::string::npos, ErrorCode::InvalidArgument, "grid entries look like 32x48");
    try {
      grid.emplace_back(std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad grid entry '" + item + "'");
    }
  }
  require(!grid.empty(), ErrorCode::InvalidArgument, "size grid is empty");
  return grid;
}

inline void cmd_sweep(Run& run, const Session& s, const ModelOptions& mo, const TrainOptions& to,
                      const SplitOptions& so, const std::string& grid_spec, Context& ctx) {
  const auto grid = parse_grid(grid_spec);
  const SweepResult r =
      size_sweep(parse_arch(mo.arch), grid, s, prepare_splits(s, so.spec(so.fold)), to.cfg, mo.model_seed);
  write_file(run.output("sweep.csv"), [&](std::ostream& os) {
    os << "n1,n2,parameters,val_r2,test_r2,ok,error\n";
    for (const auto& e : r.entries)
      os << e.n1 << ',' << e.n2 << ',' << e.parameters << ',' << e.val_r2 << ',' << e.test_r2 << ','
         << (e.ok ? 1 : 0) << ",\"" << e.error << "\"\n";
  });
  write_file(run.output("sweep_pareto.csv"), [&](std::ostream& os) {
    write_pareto_csv(os, r.front, std::vector<std::string>(r.front.size(), "none"));
  });
  for (const auto& e : r.entries)
    ctx.out << e.id() << ": " << (e.ok ? "test R2 " + std::to_string(e.test_r2) : e.error) << '\n';
}

inline void cmd_features(Run& run, const Session& s, const ModelOptions& mo, Context& ctx) {
  const FeatureSeries f = extract_features(s, default_features(parse_arch(mo.arch)));
  write_file(run.output("features.csv"), [&](std::ostream& os) { write_features_csv(os, s, f); });
  ctx.out << f.n_records << " records of " << f.dim() << " values\n";
}

// --- dispatch -------------------------------------------------------------------------

/// Runs one command line. Returns 0 on success, 2 on usage errors and 1 when
/// the pipeline fails.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural decoding benchmark toolkit", "ndec"};
  app.require_subcommand(1);
  std::string out_root, run_dir;
  bool verbose = false;
  app.add_option("--out-root", out_root, "parent of per-run output directories (default $NDEC_OUT)");
  app.add_option("--run-dir", run_dir, "write outputs to exactly this directory");
  app.add_flag("-v,--verbose", verbose, "print training progress");

  std::string session_path, checkpoint, reports_dir, cost = "ops", grid = "8x16,16x32,32x48,64x96";
  std::vector<std::string> modes{"fwd", "bid", "blockbid"};
  std::size_t grid_window = 16;
  SynthConfig sc;
  ModelOptions mo;
  TrainOptions to;
  SplitOptions so;
  FilterOptions fo;

  auto* synth = app.add_subcommand("synth", "write a synthetic session");
  synth->add_option("--seed", sc.rng_seed)->capture_default_str();
  synth->add_option("--probes", sc.n_probes)->capture_default_str();
  synth->add_option("--duration", sc.duration, "seconds")->capture_default_str();
  synth->add_option("--baseline", sc.baseline_rate, "Hz")->capture_default_str();
  synth->add_option("--depth", sc.modulation_depth, "Hz per unit speed")->capture_default_str();
  synth->add_option("--long-prob", sc.long_reach_probability)->capture_default_str();

  auto add_session = [&](CLI::App* c) {
    c->add_option("--session", session_path, "NDEC session file")->required()->check(CLI::ExistingFile);
  };
  auto add_checkpoint = [&](CLI::App* c) {
    c->add_option("--checkpoint", checkpoint, "evaluate this model instead of training one")
        ->check(CLI::ExistingFile);
  };

  auto* segment = app.add_subcommand("segment", "reach segmentation report");
  add_session(segment);
  segment->add_option("--max-reach", so.max_reach, "long-reach threshold, seconds")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "train a model, write checkpoint and history");
  add_session(train_cmd);
  mo.bind(train_cmd);
  to.bind(train_cmd);
  so.bind(train_cmd, false);

  auto* eval = app.add_subcommand("eval", "benchmark report on the test split");
  add_session(eval);
  add_checkpoint(eval);
  mo.bind(eval);
  to.bind(eval);
  so.bind(eval, true);
  fo.bind(eval);

  auto* fgrid = app.add_subcommand("filtergrid", "filter order/cutoff grid search on validation");
  add_session(fgrid);
  add_checkpoint(fgrid);
  mo.bind(fgrid);
  to.bind(fgrid);
  so.bind(fgrid, false);
  fgrid->add_option("--modes", modes)->check(CLI::IsMember({"fwd", "bid", "blockbid"}))->capture_default_str();
  fgrid->add_option("--block-window", grid_window)->capture_default_str();

  auto* pareto = app.add_subcommand("pareto", "pareto front over a directory of reports");
  pareto->add_option("--reports", reports_dir, "directory searched for report.json")->required();
  pareto->add_option("--cost", cost, "ops, mem or size")
      ->check(CLI::IsMember({"ops", "mem", "size"}))
      ->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "hidden-layer size sweep");
  add_session(sweep);
  mo.bind(sweep);
  to.bind(sweep);
  so.bind(sweep, false);
  sweep->add_option("--grid", grid, "comma-separated N1xN2 pairs")->capture_default_str();

  auto* features = app.add_subcommand("features", "dump a model's input features as CSV");
  add_session(features);
  features->add_option("--model", mo.arch)->capture_default_str();

  std::vector<const char*> argv{"ndec"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "ndec: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  Context ctx{out, err, verbose};
  try {
    to.resolve(cmd);
    Run run(cmd->get_name(), resolve_run_dir(cmd->get_name(), run_dir, out_root));
    std::optional<Session> session;
    if (!session_path.empty()) {
      session = load_session(session_path);
      run.input(session_path);
    }
    std::uint64_t seed = to.cfg.seed;
    if (cmd == synth) {
      seed = sc.rng_seed;
      cmd_synth(run, sc, ctx);
    } else if (cmd == segment) {
      cmd_segment(run, *session, so.max_reach, ctx);
    } else if (cmd == train_cmd) {
      cmd_train(run, *session, mo, to, so, ctx);
    } else if (cmd == eval) {
      if (!checkpoint.empty()) run.input(checkpoint);
      cmd_eval(run, *session, mo, to, so, fo, checkpoint, ctx);
    } else if (cmd == fgrid) {
      if (!checkpoint.empty()) run.input(checkpoint);
      cmd_filtergrid(run, *session, mo, to, so, modes, grid_window, checkpoint, ctx);
    } else if (cmd == pareto) {
      cmd_pareto(run, reports_dir, cost, ctx);
    } else if (cmd == sweep) {
      cmd_sweep(run, *session, mo, to, so, grid, ctx);
    } else if (cmd == features) {
      cmd_features(run, *session, mo, ctx);
    }
    run.write_manifest(cmd->config_to_str(true, false), seed);
    out << "outputs: " << run.dir().string() << '\n';
  } catch (const Error& e) {
    err << "ndec " << cmd->get_name() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "ndec " << cmd->get_name() << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ndec::cli
