// deferlab command-line front end. Links only the C interface.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "deferlab/deferlab.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(dl_status s) {
  return s == DL_ERR_SOLVER || s == DL_ERR_INTERNAL ? kExitFailure : kExitUsage;
}

void check(dl_status s, const std::string& context = {}) {
  if (s == DL_OK) return;
  throw Failure{exit_code_for(s), (context.empty() ? "" : context + ": ") + dl_last_error()};
}

void write_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out.flush()) throw Failure{kExitUsage, "cannot write " + tmp.string()};
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Failure{kExitUsage, "cannot rename onto " + path.string()};
  }
}

template <class T, void (*Free)(T*)>
struct Owned {
  T* p = nullptr;
  Owned() = default;
  Owned(Owned&& o) noexcept : p(std::exchange(o.p, nullptr)) {}
  Owned& operator=(Owned&& o) noexcept {
    std::swap(p, o.p);
    return *this;
  }
  ~Owned() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Config = Owned<dl_config, dl_config_free>;
using Dataset = Owned<dl_dataset, dl_dataset_free>;
using Pair = Owned<dl_pair, dl_pair_free>;
using System = Owned<dl_system, dl_system_free>;
using MilpResult = Owned<dl_milp_result, dl_milp_result_free>;
using Curve = Owned<dl_curve, dl_curve_free>;
using Bench = Owned<dl_bench, dl_bench_free>;

std::string get(const Config& cfg, const char* key) {
  const char* v = nullptr;
  check(dl_config_get(cfg.get(), key, &v), key);
  return v;
}

json config_json(const Config& cfg) {
  json out = json::object();
  for (std::size_t i = 0; i < dl_config_key_count(cfg.get()); ++i) {
    const std::string key = dl_config_key_at(cfg.get(), i);
    const auto dot = key.find('.');
    out[key.substr(0, dot)][key.substr(dot + 1)] = get(cfg, key.c_str());
  }
  return out;
}

json report_json(const dl_report& r) {
  json j;
  j["system_accuracy"] = r.system_accuracy;
  j["coverage"] = r.coverage;
  j["classifier_accuracy_nondeferred"] = r.has_classifier_arm ? json(r.classifier_accuracy_nondeferred) : json();
  j["human_accuracy_deferred"] = r.has_human_arm ? json(r.human_accuracy_deferred) : json();
  j["n_points"] = r.n_points;
  j["n_deferred"] = r.n_deferred;
  return j;
}

json pair_json(const Pair& pair) {
  const std::size_t w = dl_pair_width(pair.get());
  json rows = json::array();
  for (std::size_t k = 0; k < dl_pair_classifier_rows(pair.get()); ++k) {
    std::vector<double> row(w);
    check(dl_pair_classifier_row(pair.get(), k, row.data()));
    rows.push_back(row);
  }
  std::vector<double> rej(w);
  check(dl_pair_rejector(pair.get(), rej.data()));
  return json{{"classifier", rows}, {"rejector", rej}};
}

/// A run-record JSON (its "config" object) or an INI file.
void load_config(const Config& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kExitUsage, "cannot open " + path};
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || text[first] != '{') {
    check(dl_config_load_file(cfg.get(), path.c_str()), path);
    return;
  }
  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Failure{kExitUsage, path + ": " + e.what()};
  }
  if (!record.contains("config") || !record["config"].is_object())
    throw Failure{kExitUsage, path + ": run record has no config object"};
  for (const auto& [section, keys] : record["config"].items())
    for (const auto& [name, value] : keys.items()) {
      const std::string key = section + "." + name;
      check(dl_config_set(cfg.get(), key.c_str(), value.get<std::string>().c_str()), path);
    }
}

struct Binding {
  CLI::Option* option = nullptr;
  std::string key;
  std::string value;
};

/// Per-subcommand state: config file, key overrides and flag bindings.
struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::deque<Binding> bindings;

  void bind(const std::string& flag, const std::string& key, const std::string& help) {
    bindings.push_back({nullptr, key, {}});
    bindings.back().option = app->add_option(flag, bindings.back().value, help + " [" + key + "]");
  }

  /// Defaults, then the config file, then --set, then dedicated flags; seeds
  /// fall back to DEFERLAB_SEED when neither the file nor a flag set them.
  void resolve(Config& cfg, std::initializer_list<const char*> seed_keys) {
    check(dl_config_new(cfg.out()));
    if (!config_path.empty()) load_config(cfg, config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Failure{kExitUsage, "--set expects key=value, got '" + s + "'"};
      check(dl_config_set(cfg.get(), s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()), "--set");
    }
    for (const auto& b : bindings)
      if (b.option->count() > 0) check(dl_config_set(cfg.get(), b.key.c_str(), b.value.c_str()), b.option->get_name());
    const char* env = std::getenv("DEFERLAB_SEED");
    for (const char* key : seed_keys) {
      if (seed) check(dl_config_set(cfg.get(), key, std::to_string(*seed).c_str()), "--seed");
      else if (env && *env && !dl_config_is_set(cfg.get(), key)) check(dl_config_set(cfg.get(), key, env), "DEFERLAB_SEED");
    }
  }
};

Command& add_command(CLI::App& app, std::deque<Command>& commands, const std::string& name, const std::string& help) {
  commands.push_back({});
  Command& c = commands.back();
  c.app = app.add_subcommand(name, help);
  c.app->add_option("--config", c.config_path, "INI config or a previous run record")->check(CLI::ExistingFile);
  c.app->add_option("--set", c.sets, "Override any config key, section.name=value");
  c.app->add_option("--seed", c.seed, "Seed (falls back to DEFERLAB_SEED)");
  return c;
}

json record_base(const char* command, const Config& cfg) {
  json r;
  r["command"] = command;
  r["version"] = dl_version();
  r["config"] = config_json(cfg);
  return r;
}

std::string record_path(const std::string& out) { return out + ".run.json"; }

Dataset load_dataset(const std::string& path) {
  Dataset ds;
  check(dl_dataset_load_csv(path.c_str(), 0, ds.out()), path);
  return ds;
}

void add_data_flags(Command& c) {
  c.bind("--preset", "data.preset", "synthetic or grouped");
  c.bind("--n", "data.n", "Number of points");
  c.bind("--d", "data.d", "Feature dimension");
  c.bind("--C", "data.num_classes", "Number of classes");
  c.bind("--K", "data.expert_strength", "Classes the grouped expert gets right");
  c.bind("--distribution", "data.distribution", "uniform or mixture");
  c.bind("--clusters", "data.clusters", "Mixture components");
  c.bind("--p-m", "data.p_m", "Label noise where the planted rejector keeps");
  c.bind("--p-h0", "data.p_h0", "Human error where the planted rejector keeps");
  c.bind("--p-h1", "data.p_h1", "Human error where the planted rejector defers");
}

void add_solver_flags(Command& c) {
  c.bind("--gamma", "solver.gamma", "Activation margin");
  c.bind("--box", "solver.box", "Weight box");
  c.bind("--lambda-reg", "solver.lambda_reg", "l1 regularization weight");
  c.bind("--beta", "solver.coverage_beta", "Maximum deferral rate");
  c.bind("--time-limit", "solver.time_limit", "Seconds per MILP solve");
  c.bind("--gap", "solver.gap", "Absolute optimality gap");
  c.bind("--threads", "solver.threads", "Node-solve threads");
  c.bind("--heuristics", "solver.heuristics", "true or false");
}

void add_train_flags(Command& c) {
  c.bind("--alpha", "method.alpha", "Surrogate alpha");
  c.bind("--alpha-grid", "method.alpha_grid", "Comma-separated alphas to search");
  c.bind("--epochs", "train.epochs", "Training epochs");
  c.bind("--lr", "train.lr", "Adam learning rate");
  c.bind("--batch-size", "train.batch_size", "Minibatch size");
  c.bind("--hidden", "train.hidden_units", "Hidden units, 0 for linear");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning to defer to a human: data generation, exact MILP, surrogate training and evaluation"};
  app.require_subcommand(1);
  std::deque<Command> commands;

  // gen
  Command& gen = add_command(app, commands, "gen", "Generate a dataset");
  std::string gen_out = "data.csv", gen_meta, gen_pair;
  gen.app->add_option("--out", gen_out, "Dataset CSV")->capture_default_str();
  gen.app->add_option("--meta", gen_meta, "Planted-instance sidecar (default <out>.meta)");
  gen.app->add_option("--planted", gen_pair, "Planted pair weights CSV (default <out>.pair.csv)");
  add_data_flags(gen);

  // milp
  Command& milp = add_command(app, commands, "milp", "Solve the exact MILP on a dataset");
  std::string milp_data, milp_out = "milp.json", milp_weights = "pair.csv";
  milp.app->add_option("--data", milp_data, "Training CSV")->required()->check(CLI::ExistingFile);
  milp.app->add_option("--out", milp_out, "Solution record JSON")->capture_default_str();
  milp.app->add_option("--weights", milp_weights, "Pair weights CSV")->capture_default_str();
  add_solver_flags(milp);

  // train
  Command& train = add_command(app, commands, "train", "Train a surrogate or baseline system");
  std::string train_data, train_val, train_out = "model.txt";
  train.app->add_option("--train", train_data, "Training CSV")->required()->check(CLI::ExistingFile);
  train.app->add_option("--val", train_val, "Validation CSV (default: split off train.val_fraction)")
      ->check(CLI::ExistingFile);
  train.app->add_option("--out", train_out, "Model file")->capture_default_str();
  train.bind("--method", "method.name", "rs, rs2, ce, ova, moe, confidence, selective or triage");
  add_train_flags(train);

  // eval
  Command& eval = add_command(app, commands, "eval", "Evaluate a trained system or a MILP pair");
  std::string eval_data, eval_model, eval_pair, eval_out, eval_curve, eval_svg;
  eval.app->add_option("--data", eval_data, "Test CSV")->required()->check(CLI::ExistingFile);
  auto* model_opt = eval.app->add_option("--model", eval_model, "Model file from train")->check(CLI::ExistingFile);
  auto* pair_opt = eval.app->add_option("--pair", eval_pair, "Weights CSV from milp")->check(CLI::ExistingFile);
  model_opt->excludes(pair_opt);
  eval.app->add_option("--out", eval_out, "Report JSON");
  eval.app->add_option("--curve", eval_curve, "Accuracy-coverage curve CSV");
  eval.app->add_option("--svg", eval_svg, "Accuracy-coverage plot");
  eval.bind("--grid", "eval.curve_grid", "Maximum curve points");

  // bench
  Command& bench = add_command(app, commands, "bench", "Run methods over repeated trials");
  std::string bench_dir = "bench_out";
  bench.app->add_option("--out-dir", bench_dir, "Output directory")->capture_default_str();
  bench.bind("--methods", "method.methods", "Comma-separated methods, milp included");
  bench.bind("--trials", "eval.trials", "Trials");
  bench.bind("--jobs", "eval.jobs", "Parallel tasks");
  bench.bind("--grid", "eval.curve_grid", "Maximum curve points");
  bench.bind("--split", "data.split", "train,val,test sizes (default 70-10-20)");
  add_data_flags(bench);
  add_solver_flags(bench);
  add_train_flags(bench);

  // bound
  CLI::App* bound = app.add_subcommand("bound", "Generalization bound for halfspace pairs");
  double b_loss = 0, b_km = 0, b_kr = 0, b_delta = 0, b_perr = 0;
  std::size_t b_d = 0, b_n = 0;
  int b_digits = 4;
  bound->add_option("--train-loss", b_loss, "Empirical system loss")->required();
  bound->add_option("--km", b_km, "Classifier norm bound")->required();
  bound->add_option("--kr", b_kr, "Rejector norm bound")->required();
  bound->add_option("--d", b_d, "Feature dimension")->required();
  bound->add_option("--n", b_n, "Sample size")->required();
  bound->add_option("--perr", b_perr, "Human error rate")->required();
  bound->add_option("--delta", b_delta, "Failure probability")->required();
  bound->add_option("--digits", b_digits, "Decimals printed")->capture_default_str()->check(CLI::Range(0, 17));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Config cfg;
    if (gen.app->parsed()) {
      gen.resolve(cfg, {"data.seed"});
      Dataset ds;
      Pair planted;
      check(dl_generate(cfg.get(), ds.out(), planted.out()));
      check(dl_dataset_save_csv(ds.get(), gen_out.c_str()), gen_out);
      json rec = record_base("gen", cfg);
      rec["outputs"] = {{"data", gen_out}};
      if (planted.get()) {
        if (gen_meta.empty()) gen_meta = gen_out + ".meta";
        if (gen_pair.empty()) gen_pair = gen_out + ".pair.csv";
        check(dl_write_planted_metadata(cfg.get(), planted.get(), gen_meta.c_str()), gen_meta);
        check(dl_pair_save_csv(planted.get(), gen_pair.c_str()), gen_pair);
        rec["outputs"]["meta"] = gen_meta;
        rec["outputs"]["planted"] = gen_pair;
      }
      rec["n"] = dl_dataset_size(ds.get());
      rec["human_accuracy"] = dl_dataset_human_accuracy(ds.get());
      write_atomic(record_path(gen_out), rec.dump(2) + "\n");
      std::cout << "wrote " << gen_out << " (" << dl_dataset_size(ds.get()) << " points, human accuracy "
                << dl_dataset_human_accuracy(ds.get()) << ")\n";
    } else if (milp.app->parsed()) {
      milp.resolve(cfg, {"solver.seed"});
      Dataset ds = load_dataset(milp_data);
      MilpResult res;
      check(dl_milp_solve(cfg.get(), ds.get(), res.out()));
      json rec = record_base("milp", cfg);
      rec["data"] = milp_data;
      rec["status"] = dl_milp_status(res.get());
      rec["objective"] = dl_milp_objective(res.get());
      rec["best_bound"] = dl_milp_best_bound(res.get());
      rec["train_loss"] = dl_milp_train_loss(res.get());
      rec["nodes"] = dl_milp_nodes(res.get());
      rec["lp_iterations"] = dl_milp_lp_iterations(res.get());
      rec["wall_time_s"] = dl_milp_wall_time(res.get());
      Pair pair;
      const dl_status ps = dl_milp_pair(res.get(), pair.out());
      if (ps == DL_OK) {
        rec["weights"] = pair_json(pair);
        check(dl_pair_save_csv(pair.get(), milp_weights.c_str()), milp_weights);
        rec["weights_csv"] = milp_weights;
      } else {
        rec["weights"] = nullptr;
      }
      write_atomic(milp_out, rec.dump(2) + "\n");
      std::cout << "status " << dl_milp_status(res.get()) << ", objective " << dl_milp_objective(res.get())
                << ", train error " << dl_milp_train_loss(res.get()) << ", " << dl_milp_nodes(res.get())
                << " nodes, " << dl_milp_wall_time(res.get()) << " s\n";
      check(ps);
    } else if (train.app->parsed()) {
      train.resolve(cfg, {"train.seed"});
      Dataset full = load_dataset(train_data);
      Dataset tr, va;
      const dl_dataset* tr_p = full.get();
      const dl_dataset* va_p = nullptr;
      if (!train_val.empty()) {
        va = load_dataset(train_val);
        va_p = va.get();
      } else {
        const double frac = std::stod(get(cfg, "train.val_fraction"));
        check(dl_dataset_split(full.get(), frac, std::stoull(get(cfg, "train.seed")), tr.out(), va.out()),
              "validation split");
        tr_p = tr.get();
        va_p = va.get();
      }
      System sys;
      check(dl_train(cfg.get(), tr_p, va_p, sys.out()), "training");
      check(dl_system_save(sys.get(), train_out.c_str()), train_out);
      dl_report val_report;
      check(dl_evaluate_system(sys.get(), va_p, &val_report));
      json rec = record_base("train", cfg);
      rec["train"] = train_data;
      rec["val"] = train_val.empty() ? json("split") : json(train_val);
      rec["model"] = train_out;
      rec["tau"] = dl_system_tau(sys.get());
      rec["alpha"] = dl_system_alpha(sys.get());
      rec["validation"] = report_json(val_report);
      write_atomic(record_path(train_out), rec.dump(2) + "\n");
      std::cout << "trained " << dl_system_method(sys.get()) << " (alpha " << dl_system_alpha(sys.get())
                << "), validation accuracy " << val_report.system_accuracy << ", coverage " << val_report.coverage
                << "\n";
    } else if (eval.app->parsed()) {
      eval.resolve(cfg, {});
      if (eval_model.empty() == eval_pair.empty()) throw Failure{kExitUsage, "eval needs exactly one of --model or --pair"};
      Dataset ds = load_dataset(eval_data);
      dl_report rep;
      Curve curve;
      const auto grid = static_cast<std::size_t>(std::stoull(get(cfg, "eval.curve_grid")));
      std::string name;
      if (!eval_model.empty()) {
        System sys;
        check(dl_system_load(eval_model.c_str(), sys.out()), eval_model);
        check(dl_evaluate_system(sys.get(), ds.get(), &rep));
        check(dl_curve_system(sys.get(), ds.get(), grid, curve.out()));
        name = dl_system_method(sys.get());
      } else {
        Pair pair;
        check(dl_pair_load_csv(eval_pair.c_str(), pair.out()), eval_pair);
        check(dl_evaluate_pair(pair.get(), ds.get(), &rep));
        check(dl_curve_pair(pair.get(), ds.get(), grid, curve.out()));
        name = "milp";
      }
      if (!eval_curve.empty()) check(dl_curve_save_csv(curve.get(), eval_curve.c_str()), eval_curve);
      if (!eval_svg.empty()) check(dl_curve_save_svg(curve.get(), &rep, name.c_str(), eval_data.c_str(), eval_svg.c_str()), eval_svg);
      json rec = record_base("eval", cfg);
      rec["data"] = eval_data;
      rec["system"] = eval_model.empty() ? eval_pair : eval_model;
      rec["report"] = report_json(rep);
      if (!eval_out.empty()) write_atomic(eval_out, rec.dump(2) + "\n");
      std::cout << "system_accuracy " << rep.system_accuracy << "\ncoverage " << rep.coverage << "\n";
      std::cout << "classifier_accuracy_nondeferred ";
      if (rep.has_classifier_arm) std::cout << rep.classifier_accuracy_nondeferred; else std::cout << "-";
      std::cout << "\nhuman_accuracy_deferred ";
      if (rep.has_human_arm) std::cout << rep.human_accuracy_deferred; else std::cout << "-";
      std::cout << "\nn_points " << rep.n_points << "\n";
    } else if (bench.app->parsed()) {
      bench.resolve(cfg, {"data.seed", "solver.seed", "train.seed", "eval.seed"});
      Bench b;
      check(dl_bench_run(cfg.get(), b.out()), "benchmark");
      const fs::path dir(bench_dir);
      fs::create_directories(dir / "curves");
      check(dl_bench_save_results(b.get(), (dir / "results.csv").string().c_str()));
      check(dl_bench_save_summary(b.get(), (dir / "summary.csv").string().c_str()));
      json rows = json::array();
      for (std::size_t i = 0; i < dl_bench_row_count(b.get()); ++i) {
        dl_bench_row r;
        check(dl_bench_row_at(b.get(), i, &r));
        const fs::path curve = dir / "curves" / (std::string(r.method) + "_trial" + std::to_string(r.trial) + ".csv");
        check(dl_bench_save_curve(b.get(), i, curve.string().c_str()));
        json row = {{"method", r.method}, {"trial", r.trial}, {"test", report_json(r.report)},
                    {"train_error", r.train_error}, {"alpha", r.alpha}, {"seconds", r.seconds}};
        row["tau"] = std::isfinite(r.tau) ? json(r.tau) : json(r.tau > 0 ? "inf" : "-inf");
        if (*r.status) row["status"] = r.status;
        rows.push_back(row);
      }
      check(dl_bench_save_svg(b.get(), 0, "accuracy vs coverage, trial 0", (dir / "coverage.svg").string().c_str()));
      json rec = record_base("bench", cfg);
      rec["rows"] = rows;
      write_atomic(dir / "run.json", rec.dump(2) + "\n");
      std::printf("%-11s %6s %10s %10s %10s\n", "method", "trials", "mean_acc", "se", "coverage");
      for (std::size_t i = 0; i < dl_bench_summary_count(b.get()); ++i) {
        dl_bench_summary s;
        check(dl_bench_summary_at(b.get(), i, &s));
        if (s.has_se)
          std::printf("%-11s %6zu %10.4f %10.4f %10.4f\n", s.method, s.trials, s.mean_system_accuracy,
                      s.se_system_accuracy, s.mean_coverage);
        else
          std::printf("%-11s %6zu %10.4f %10s %10.4f\n", s.method, s.trials, s.mean_system_accuracy, "-",
                      s.mean_coverage);
      }
    } else if (bound->parsed()) {
      double v = 0;
      check(dl_generalization_bound(b_loss, b_km, b_kr, b_d, b_n, b_perr, b_delta, &v));
      std::printf("%.*f\n", b_digits, v);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
