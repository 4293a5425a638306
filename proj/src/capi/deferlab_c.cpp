#include "deferlab/deferlab.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "config.hpp"
#include "deferlab/io.hpp"
#include "deferlab/rng.hpp"

using namespace deferlab;

struct dl_config {
  capi::Config cfg;
};
struct dl_dataset {
  DeferDataset data;
};
struct dl_pair {
  HalfspacePair pair;
};
struct dl_system {
  TrainedSystem sys;
};
struct dl_milp_result {
  MilpSolution sol;
};
struct dl_curve {
  CoverageCurve curve;
};
struct dl_bench {
  BenchmarkResult result;
};

namespace {

thread_local std::string g_error;
thread_local std::size_t g_error_line = 0;

dl_status fail(dl_status code, const std::string& msg, std::size_t line = 0) {
  g_error = msg;
  g_error_line = line;
  return code;
}

template <class F>
dl_status guarded(F&& f) {
  g_error.clear();
  g_error_line = 0;
  try {
    f();
    return DL_OK;
  } catch (const ParseError& e) {
    return fail(DL_ERR_PARSE, e.what(), e.line());
  } catch (const IoError& e) {
    return fail(DL_ERR_IO, e.what());
  } catch (const TrainingError& e) {
    return fail(DL_ERR_SOLVER, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(DL_ERR_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(DL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DL_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string(what) + " must not be NULL");
}

std::string read_text(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string("cannot open ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void fill(const EvalReport& r, dl_report* out) {
  out->system_accuracy = r.system_accuracy;
  out->coverage = r.coverage;
  out->has_classifier_arm = r.classifier_accuracy_nondeferred.has_value();
  out->classifier_accuracy_nondeferred = r.classifier_accuracy_nondeferred.value_or(0.0);
  out->has_human_arm = r.human_accuracy_deferred.has_value();
  out->human_accuracy_deferred = r.human_accuracy_deferred.value_or(0.0);
  out->n_points = r.n_points;
  out->n_deferred = r.n_deferred;
}

}  // namespace

extern "C" {

const char* dl_version(void) { return "1.0.0"; }
const char* dl_last_error(void) { return g_error.c_str(); }
size_t dl_last_error_line(void) { return g_error_line; }

dl_status dl_config_new(dl_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new dl_config;
  });
}
void dl_config_free(dl_config* cfg) { delete cfg; }

dl_status dl_config_set(dl_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

dl_status dl_config_get(const dl_config* cfg, const char* key, const char** value) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    *value = cfg->cfg.get(key).c_str();
  });
}

int dl_config_is_set(const dl_config* cfg, const char* key) {
  if (!cfg || !key) return 0;
  try {
    return cfg->cfg.is_set(key) ? 1 : 0;
  } catch (...) {
    return 0;
  }
}

size_t dl_config_key_count(const dl_config* cfg) { return cfg ? cfg->cfg.size() : 0; }
const char* dl_config_key_at(const dl_config* cfg, size_t index) {
  return cfg && index < cfg->cfg.size() ? cfg->cfg.key_at(index) : nullptr;
}

dl_status dl_config_load_string(dl_config* cfg, const char* text) {
  return guarded([&] {
    need(cfg, "config");
    need(text, "text");
    capi::Config copy = cfg->cfg;
    copy.load(text);
    cfg->cfg = std::move(copy);
  });
}

dl_status dl_config_load_file(dl_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    need(path, "path");
    capi::Config copy = cfg->cfg;
    copy.load(read_text(path));
    cfg->cfg = std::move(copy);
  });
}

dl_status dl_config_dump(const dl_config* cfg, char** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    const std::string s = cfg->cfg.dump();
    *out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!*out) throw std::bad_alloc();
    std::memcpy(*out, s.c_str(), s.size() + 1);
  });
}
void dl_string_free(char* s) { std::free(s); }

dl_status dl_dataset_load_csv(const char* path, int num_classes, dl_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    if (num_classes < 0) throw std::invalid_argument("num_classes must be >= 0");
    *out = new dl_dataset{load_dataset_csv(path, num_classes)};
  });
}

dl_status dl_dataset_save_csv(const dl_dataset* ds, const char* path) {
  return guarded([&] {
    need(ds, "dataset");
    need(path, "path");
    save_dataset_csv(path, ds->data);
  });
}

void dl_dataset_free(dl_dataset* ds) { delete ds; }
size_t dl_dataset_size(const dl_dataset* ds) { return ds ? ds->data.size() : 0; }
size_t dl_dataset_dim(const dl_dataset* ds) { return ds ? ds->data.dim() : 0; }
int dl_dataset_num_classes(const dl_dataset* ds) { return ds ? ds->data.num_classes() : 0; }
double dl_dataset_human_accuracy(const dl_dataset* ds) { return ds ? ds->data.human_accuracy() : 0.0; }

dl_status dl_dataset_split(const dl_dataset* ds, double fraction, uint64_t seed, dl_dataset** first,
                           dl_dataset** second) {
  return guarded([&] {
    need(ds, "dataset");
    need(first, "first");
    need(second, "second");
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split fraction must lie in (0, 1)");
    const std::size_t n = ds->data.size();
    const auto head = static_cast<std::size_t>(std::llround((1.0 - fraction) * static_cast<double>(n)));
    if (head == 0 || head == n) throw std::invalid_argument("split leaves an empty part");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed, Stream::Split);
    rng.shuffle(std::span<std::size_t>(order));
    const std::span<const std::size_t> o(order);
    auto a = std::make_unique<dl_dataset>(dl_dataset{ds->data.subset(o.first(head))});
    auto b = std::make_unique<dl_dataset>(dl_dataset{ds->data.subset(o.subspan(head))});
    *first = a.release();
    *second = b.release();
  });
}

dl_status dl_generate(const dl_config* cfg, dl_dataset** out, dl_pair** planted) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    if (planted) *planted = nullptr;
    const auto& c = cfg->cfg;
    if (c.get("data.preset") == "grouped") {
      const BenchmarkInstance inst = c.instance();
      *out = new dl_dataset{generate_grouped_expert(inst.d, inst.n, inst.num_classes, inst.expert_strength,
                                                    c.synthetic().seed, inst.grouped)};
      return;
    }
    PlantedInstance p = generate_synthetic(c.synthetic());
    auto pair = std::make_unique<dl_pair>(dl_pair{std::move(p.planted_pair)});
    *out = new dl_dataset{std::move(p.dataset)};
    if (planted) *planted = pair.release();
  });
}

dl_status dl_write_planted_metadata(const dl_config* cfg, const dl_pair* planted, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    need(planted, "pair");
    need(path, "path");
    std::ostringstream ss;
    write_planted_metadata(ss, cfg->cfg.synthetic(), planted->pair);
    write_file_atomic(path, ss.str());
  });
}

dl_status dl_pair_load_csv(const char* path, dl_pair** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new dl_pair{load_pair_csv(path)};
  });
}

dl_status dl_pair_save_csv(const dl_pair* pair, const char* path) {
  return guarded([&] {
    need(pair, "pair");
    need(path, "path");
    save_pair_csv(path, pair->pair);
  });
}

void dl_pair_free(dl_pair* pair) { delete pair; }
size_t dl_pair_classifier_rows(const dl_pair* pair) { return pair ? pair->pair.classifier.size() : 0; }
size_t dl_pair_width(const dl_pair* pair) { return pair ? pair->pair.rejector.size() : 0; }

dl_status dl_pair_classifier_row(const dl_pair* pair, size_t row, double* weights) {
  return guarded([&] {
    need(pair, "pair");
    need(weights, "weights");
    if (row >= pair->pair.classifier.size()) throw std::invalid_argument("classifier row out of range");
    std::copy(pair->pair.classifier[row].begin(), pair->pair.classifier[row].end(), weights);
  });
}

dl_status dl_pair_rejector(const dl_pair* pair, double* weights) {
  return guarded([&] {
    need(pair, "pair");
    need(weights, "weights");
    std::copy(pair->pair.rejector.begin(), pair->pair.rejector.end(), weights);
  });
}

dl_status dl_milp_solve(const dl_config* cfg, const dl_dataset* train, dl_milp_result** out) {
  return guarded([&] {
    need(cfg, "config");
    need(train, "dataset");
    need(out, "out");
    const MilpConfig mc = cfg->cfg.milp();
    const MilpProblem problem = build_milp(train->data, mc);
    *out = new dl_milp_result{solve_milp(problem, mc)};
  });
}

void dl_milp_result_free(dl_milp_result* r) { delete r; }
const char* dl_milp_status(const dl_milp_result* r) { return r ? to_string(r->sol.status) : ""; }
double dl_milp_objective(const dl_milp_result* r) { return r ? r->sol.objective : 0.0; }
double dl_milp_best_bound(const dl_milp_result* r) { return r ? r->sol.best_bound : 0.0; }
double dl_milp_train_loss(const dl_milp_result* r) { return r ? r->sol.train_loss : 0.0; }
size_t dl_milp_nodes(const dl_milp_result* r) { return r ? r->sol.nodes_explored : 0; }
size_t dl_milp_lp_iterations(const dl_milp_result* r) { return r ? r->sol.lp_iterations : 0; }
double dl_milp_wall_time(const dl_milp_result* r) { return r ? r->sol.wall_time_s : 0.0; }

dl_status dl_milp_pair(const dl_milp_result* r, dl_pair** out) {
  return guarded([&] {
    need(r, "result");
    need(out, "out");
    if (r->sol.status == MilpStatus::Infeasible || r->sol.status == MilpStatus::TimeLimitNoSolution)
      throw TrainingError(std::string("MILP returned no pair (") + to_string(r->sol.status) + ")");
    *out = new dl_pair{r->sol.pair};
  });
}

dl_status dl_train(const dl_config* cfg, const dl_dataset* train, const dl_dataset* val, dl_system** out) {
  return guarded([&] {
    need(cfg, "config");
    need(train, "train dataset");
    need(val, "validation dataset");
    need(out, "out");
    *out = new dl_system{train_method(train->data, val->data, cfg->cfg.train())};
  });
}

dl_status dl_system_load(const char* path, dl_system** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::istringstream in(read_text(path));
    *out = new dl_system{read_system(in)};
  });
}

dl_status dl_system_save(const dl_system* sys, const char* path) {
  return guarded([&] {
    need(sys, "system");
    need(path, "path");
    std::ostringstream ss;
    write_system(ss, sys->sys);
    write_file_atomic(path, ss.str());
  });
}

void dl_system_free(dl_system* sys) { delete sys; }
const char* dl_system_method(const dl_system* sys) { return sys ? to_string(sys->sys.method) : ""; }
double dl_system_tau(const dl_system* sys) { return sys ? sys->sys.tau : 0.0; }
double dl_system_alpha(const dl_system* sys) { return sys ? sys->sys.alpha : 0.0; }

dl_status dl_evaluate_system(const dl_system* sys, const dl_dataset* ds, dl_report* out) {
  return guarded([&] {
    need(sys, "system");
    need(ds, "dataset");
    need(out, "out");
    fill(evaluate(sys->sys, ds->data), out);
  });
}

dl_status dl_evaluate_pair(const dl_pair* pair, const dl_dataset* ds, dl_report* out) {
  return guarded([&] {
    need(pair, "pair");
    need(ds, "dataset");
    need(out, "out");
    fill(evaluate(pair->pair, ds->data), out);
  });
}

dl_status dl_curve_system(const dl_system* sys, const dl_dataset* ds, size_t grid, dl_curve** out) {
  return guarded([&] {
    need(sys, "system");
    need(ds, "dataset");
    need(out, "out");
    *out = new dl_curve{coverage_curve(sys->sys, ds->data, grid)};
  });
}

dl_status dl_curve_pair(const dl_pair* pair, const dl_dataset* ds, size_t grid, dl_curve** out) {
  return guarded([&] {
    need(pair, "pair");
    need(ds, "dataset");
    need(out, "out");
    *out = new dl_curve{coverage_curve(pair->pair, ds->data, grid)};
  });
}

void dl_curve_free(dl_curve* c) { delete c; }
size_t dl_curve_size(const dl_curve* c) { return c ? c->curve.points.size() : 0; }

dl_status dl_curve_point(const dl_curve* c, size_t i, double* threshold, double* coverage, double* system_accuracy) {
  return guarded([&] {
    need(c, "curve");
    if (i >= c->curve.points.size()) throw std::invalid_argument("curve index out of range");
    const auto& p = c->curve.points[i];
    if (threshold) *threshold = p.threshold;
    if (coverage) *coverage = p.coverage;
    if (system_accuracy) *system_accuracy = p.system_accuracy;
  });
}

dl_status dl_curve_save_csv(const dl_curve* c, const char* path) {
  return guarded([&] {
    need(c, "curve");
    need(path, "path");
    std::ostringstream ss;
    write_curve_csv(ss, c->curve);
    write_file_atomic(path, ss.str());
  });
}

dl_status dl_curve_save_svg(const dl_curve* c, const dl_report* report, const char* name, const char* title,
                            const char* path) {
  return guarded([&] {
    need(c, "curve");
    need(report, "report");
    need(path, "path");
    const SvgSeries s{name ? name : "", c->curve, report->coverage, report->system_accuracy};
    write_file_atomic(path, render_coverage_svg(std::span<const SvgSeries>(&s, 1), title ? title : ""));
  });
}

dl_status dl_generalization_bound(double train_loss, double k_m, double k_r, size_t d, size_t n,
                                  double human_error_rate, double delta, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = generalization_bound(train_loss, k_m, k_r, d, n, human_error_rate, delta);
  });
}

dl_status dl_bench_run(const dl_config* cfg, dl_bench** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    const BenchmarkOptions o = cfg->cfg.bench();
    auto b = std::make_unique<dl_bench>();
    b->result = run_benchmark(cfg->cfg.instance(), o);
    *out = b.release();
  });
}

void dl_bench_free(dl_bench* b) { delete b; }
size_t dl_bench_row_count(const dl_bench* b) { return b ? b->result.rows.size() : 0; }

dl_status dl_bench_row_at(const dl_bench* b, size_t i, dl_bench_row* out) {
  return guarded([&] {
    need(b, "bench");
    need(out, "out");
    if (i >= b->result.rows.size()) throw std::invalid_argument("row index out of range");
    const auto& r = b->result.rows[i];
    out->method = to_string(r.method);
    out->trial = r.trial;
    fill(r.report, &out->report);
    out->train_error = r.train_error;
    out->tau = r.tau;
    out->alpha = r.alpha;
    out->status = r.status.c_str();
    out->seconds = r.seconds;
  });
}

size_t dl_bench_summary_count(const dl_bench* b) { return b ? b->result.summary.size() : 0; }

dl_status dl_bench_summary_at(const dl_bench* b, size_t i, dl_bench_summary* out) {
  return guarded([&] {
    need(b, "bench");
    need(out, "out");
    if (i >= b->result.summary.size()) throw std::invalid_argument("summary index out of range");
    const auto& s = b->result.summary[i];
    out->method = to_string(s.method);
    out->trials = s.trials;
    out->mean_system_accuracy = s.mean_system_accuracy;
    out->has_se = s.se_system_accuracy.has_value();
    out->se_system_accuracy = s.se_system_accuracy.value_or(0.0);
    out->mean_coverage = s.mean_coverage;
  });
}

dl_status dl_bench_save_results(const dl_bench* b, const char* path) {
  return guarded([&] {
    need(b, "bench");
    need(path, "path");
    std::ostringstream ss;
    write_results_csv(ss, b->result.rows);
    write_file_atomic(path, ss.str());
  });
}

dl_status dl_bench_save_summary(const dl_bench* b, const char* path) {
  return guarded([&] {
    need(b, "bench");
    need(path, "path");
    std::ostringstream ss;
    write_summary_csv(ss, b->result.summary);
    write_file_atomic(path, ss.str());
  });
}

dl_status dl_bench_save_curve(const dl_bench* b, size_t row, const char* path) {
  return guarded([&] {
    need(b, "bench");
    need(path, "path");
    if (row >= b->result.rows.size()) throw std::invalid_argument("row index out of range");
    std::ostringstream ss;
    write_curve_csv(ss, b->result.rows[row].curve);
    write_file_atomic(path, ss.str());
  });
}

dl_status dl_bench_save_svg(const dl_bench* b, size_t trial, const char* title, const char* path) {
  return guarded([&] {
    need(b, "bench");
    need(path, "path");
    std::vector<SvgSeries> series;
    for (const auto& r : b->result.rows)
      if (r.trial == trial)
        series.push_back({to_string(r.method), r.curve, r.report.coverage, r.report.system_accuracy});
    if (series.empty()) throw std::invalid_argument("no rows for trial " + std::to_string(trial));
    write_file_atomic(path, render_coverage_svg(series, title ? title : ""));
  });
}

}  // extern "C"
