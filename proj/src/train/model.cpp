#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "deferlab/io.hpp"
#include "deferlab/rng.hpp"
#include "deferlab/train.hpp"

namespace deferlab {

ScoreModel::ScoreModel(Architecture arch, std::size_t input_dim, std::size_t output_dim, std::size_t hidden_units)
    : arch_(arch), in_(input_dim), out_(output_dim), hidden_(arch == Architecture::OneHidden ? hidden_units : 0) {
  if (output_dim == 0) throw std::invalid_argument("model needs at least one output");
  if (arch == Architecture::OneHidden && hidden_units == 0)
    throw std::invalid_argument("hidden layer needs at least one unit");
  if (arch == Architecture::Linear) w_.assign(out_ * (in_ + 1), 0.0);
  else w_.assign(hidden_ * (in_ + 1) + out_ * (hidden_ + 1), 0.0);
}

void ScoreModel::initialize(Rng& rng) {
  auto fill = [&](std::size_t begin, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t k = begin; k < begin + count; ++k) w_[k] = rng.uniform(-bound, bound);
  };
  if (arch_ == Architecture::Linear) {
    fill(0, w_.size(), in_ + 1);
  } else {
    const std::size_t first = hidden_ * (in_ + 1);
    fill(0, first, in_ + 1);
    fill(first, w_.size() - first, hidden_ + 1);
  }
}

std::vector<double> ScoreModel::forward(std::span<const double> x) const {
  if (x.size() != in_) throw std::invalid_argument("input dimension mismatch");
  std::vector<double> out(out_);
  if (arch_ == Architecture::Linear) {
    for (std::size_t k = 0; k < out_; ++k) out[k] = affine_score({w_.data() + k * (in_ + 1), in_ + 1}, x);
    return out;
  }
  std::vector<double> h(hidden_);
  for (std::size_t j = 0; j < hidden_; ++j)
    h[j] = std::max(0.0, affine_score({w_.data() + j * (in_ + 1), in_ + 1}, x));
  const double* w2 = w_.data() + hidden_ * (in_ + 1);
  for (std::size_t k = 0; k < out_; ++k) out[k] = affine_score({w2 + k * (hidden_ + 1), hidden_ + 1}, h);
  return out;
}

void ScoreModel::backward(std::span<const double> x, std::span<const double> upstream, std::span<double> grad) const {
  if (arch_ == Architecture::Linear) {
    for (std::size_t k = 0; k < out_; ++k) {
      double* g = grad.data() + k * (in_ + 1);
      for (std::size_t j = 0; j < in_; ++j) g[j] += upstream[k] * x[j];
      g[in_] += upstream[k];
    }
    return;
  }
  std::vector<double> pre(hidden_), h(hidden_);
  for (std::size_t j = 0; j < hidden_; ++j) {
    pre[j] = affine_score({w_.data() + j * (in_ + 1), in_ + 1}, x);
    h[j] = std::max(0.0, pre[j]);
  }
  const std::size_t off = hidden_ * (in_ + 1);
  const double* w2 = w_.data() + off;
  std::vector<double> dh(hidden_, 0.0);
  for (std::size_t k = 0; k < out_; ++k) {
    double* g = grad.data() + off + k * (hidden_ + 1);
    for (std::size_t j = 0; j < hidden_; ++j) {
      g[j] += upstream[k] * h[j];
      dh[j] += upstream[k] * w2[k * (hidden_ + 1) + j];
    }
    g[hidden_] += upstream[k];
  }
  for (std::size_t j = 0; j < hidden_; ++j) {
    if (pre[j] <= 0.0) continue;
    double* g = grad.data() + j * (in_ + 1);
    for (std::size_t i = 0; i < in_; ++i) g[i] += dh[j] * x[i];
    g[in_] += dh[j];
  }
}

Adam::Adam(std::size_t num_params, AdamOptions options)
    : opt_(options), m_(num_params, 0.0), v_(num_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = opt_.beta1 * m_[k] + (1.0 - opt_.beta1) * grad[k];
    v_[k] = opt_.beta2 * v_[k] + (1.0 - opt_.beta2) * grad[k] * grad[k];
    params[k] -= opt_.learning_rate * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + opt_.eps);
  }
}

namespace {

constexpr const char* kMethodNames[] = {"rs", "rs2", "ce", "ova", "moe", "confidence", "selective", "triage", "milp"};

double max_softmax(std::span<const double> g) {
  const double mx = *std::max_element(g.begin(), g.end());
  double z = 0.0;
  for (double v : g) z += std::exp(v - mx);
  return 1.0 / z;
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

const char* to_string(Method m) { return kMethodNames[static_cast<int>(m)]; }

Method parse_method(const std::string& name) {
  for (int k = 0; k < static_cast<int>(std::size(kMethodNames)); ++k)
    if (name == kMethodNames[k]) return static_cast<Method>(k);
  throw std::invalid_argument("unknown method '" + name + "'");
}

bool is_surrogate_method(Method m) {
  return m == Method::RS || m == Method::RS2 || m == Method::CE || m == Method::OvA || m == Method::MoE;
}

SurrogateKind surrogate_of(Method m) {
  switch (m) {
    case Method::RS: return SurrogateKind::RS;
    case Method::RS2: return SurrogateKind::RS2;
    case Method::CE: return SurrogateKind::CE;
    case Method::OvA: return SurrogateKind::OvA;
    case Method::MoE: return SurrogateKind::MoE;
    default: throw std::invalid_argument(std::string("method '") + to_string(m) + "' has no surrogate loss");
  }
}

double rejection_score(const TrainedSystem& s, std::span<const double> x) {
  const std::vector<double> g = s.model.forward(x);
  const std::size_t C = static_cast<std::size_t>(s.num_classes);
  switch (s.method) {
    case Method::RS:
    case Method::CE:
    case Method::OvA:
      return g[C] - *std::max_element(g.begin(), g.begin() + C);
    case Method::RS2:
    case Method::MoE:
      return g[C];
    case Method::Confidence:
      return sigmoid(s.aux_model->forward(x)[0]) - max_softmax(g);
    case Method::Selective:
      return -max_softmax(g);
    case Method::Triage:
      return s.aux_model->forward(x)[0];
    case Method::Milp: break;
  }
  throw std::invalid_argument("not a trained score system");
}

bool defers_at(const TrainedSystem& s, double score, double tau) {
  return s.method == Method::Confidence ? score > tau : score >= tau;
}

int classifier_label(const TrainedSystem& s, std::span<const double> x) {
  const std::vector<double> g = s.model.forward(x);
  return static_cast<int>(argmax_lowest(std::span<const double>(g).first(static_cast<std::size_t>(s.num_classes))));
}

Prediction predict(const TrainedSystem& s, std::span<const double> x, int human_label) {
  Prediction p;
  p.classifier_label = classifier_label(s, x);
  p.rejection_score = rejection_score(s, x);
  p.deferred = defers_at(s, p.rejection_score, s.tau);
  p.final_label = p.deferred ? human_label : p.classifier_label;
  return p;
}

std::vector<Decision> decide_at(const TrainedSystem& s, const DeferDataset& data, double tau) {
  if (data.dim() != s.model.input_dim()) throw std::invalid_argument("dataset dimension does not match the model");
  std::vector<Decision> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i].classifier_label = classifier_label(s, data.row(i));
    out[i].deferred = defers_at(s, rejection_score(s, data.row(i)), tau);
  }
  return out;
}

std::vector<Decision> decide(const TrainedSystem& s, const DeferDataset& data) { return decide_at(s, data, s.tau); }

double system_accuracy(const TrainedSystem& s, const DeferDataset& data) {
  const auto dec = decide(s, data);
  return 1.0 - system_loss_01(data, dec);
}

namespace {

void write_model(std::ostream& out, const char* tag, const ScoreModel& m) {
  out << tag << ',' << (m.architecture() == Architecture::Linear ? "linear" : "one_hidden") << ','
      << m.input_dim() << ',' << m.output_dim() << ',' << m.hidden_units() << '\n';
  const auto w = m.weights();
  for (std::size_t k = 0; k < w.size(); ++k) out << (k ? "," : "") << format_double(w[k]);
  out << '\n';
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) f.push_back(item);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

struct LineReader {
  std::istream& in;
  std::size_t line_no = 0;
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }
};

std::size_t parse_count(const std::string& s, std::size_t line) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError("expected a non-negative integer, got '" + s + "'", line);
  }
}

double parse_value(const std::string& s, std::size_t line) {
  try {
    return parse_double(s);
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + s + "'", line);
  }
}

ScoreModel read_model(LineReader& r, const std::vector<std::string>& head) {
  if (head.size() != 5) throw ParseError("model header needs 5 fields", r.line_no);
  Architecture arch;
  if (head[1] == "linear") arch = Architecture::Linear;
  else if (head[1] == "one_hidden") arch = Architecture::OneHidden;
  else throw ParseError("unknown architecture '" + head[1] + "'", r.line_no);
  const std::size_t header_line = r.line_no;
  ScoreModel m;
  try {
    m = ScoreModel(arch, parse_count(head[2], header_line), parse_count(head[3], header_line),
                   parse_count(head[4], header_line));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), header_line);
  }
  std::string line;
  if (!r.next(line)) throw ParseError("missing weight line", header_line + 1);
  const auto f = split_fields(line);
  if (f.size() != m.num_params())
    throw ParseError("expected " + std::to_string(m.num_params()) + " weights, got " + std::to_string(f.size()),
                     r.line_no);
  for (std::size_t k = 0; k < f.size(); ++k) m.weights()[k] = parse_value(f[k], r.line_no);
  return m;
}

}  // namespace

void write_system(std::ostream& out, const TrainedSystem& s) {
  out << "system," << to_string(s.method) << ',' << s.num_classes << ',' << format_double(s.tau) << ','
      << format_double(s.alpha) << '\n';
  write_model(out, "model", s.model);
  if (s.aux_model) write_model(out, "aux", *s.aux_model);
}

TrainedSystem read_system(std::istream& in) {
  LineReader r{in};
  std::string line;
  if (!r.next(line)) throw ParseError("empty system file", 1);
  auto f = split_fields(line);
  if (f.size() != 5 || f[0] != "system") throw ParseError("expected 'system,<method>,<C>,<tau>,<alpha>'", r.line_no);
  TrainedSystem s;
  try {
    s.method = parse_method(f[1]);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), r.line_no);
  }
  if (s.method == Method::Milp) throw ParseError("milp systems are stored as pair files", r.line_no);
  s.num_classes = static_cast<int>(parse_count(f[2], r.line_no));
  if (s.num_classes < 2) throw ParseError("need at least 2 classes", r.line_no);
  s.tau = parse_value(f[3], r.line_no);
  s.alpha = parse_value(f[4], r.line_no);
  if (!r.next(line)) throw ParseError("missing model header", r.line_no + 1);
  f = split_fields(line);
  if (f.empty() || f[0] != "model") throw ParseError("expected a 'model' header", r.line_no);
  const std::size_t model_line = r.line_no;
  s.model = read_model(r, f);
  const std::size_t C = static_cast<std::size_t>(s.num_classes);
  const bool two_stage = !is_surrogate_method(s.method);
  if (s.model.output_dim() != (two_stage ? C : C + 1))
    throw ParseError("model output size does not match the method and class count", model_line);
  if (r.next(line)) {
    f = split_fields(line);
    if (f.empty() || f[0] != "aux") throw ParseError("expected an 'aux' header", r.line_no);
    const std::size_t aux_line = r.line_no;
    s.aux_model = read_model(r, f);
    if (s.aux_model->output_dim() != 1 || s.aux_model->input_dim() != s.model.input_dim())
      throw ParseError("aux model must map the same inputs to one logit", aux_line);
  }
  const bool needs_aux = s.method == Method::Confidence || s.method == Method::Triage;
  if (needs_aux != s.aux_model.has_value())
    throw ParseError(needs_aux ? "method needs an aux model" : "unexpected aux model", r.line_no);
  if (r.next(line)) throw ParseError("trailing content", r.line_no);
  return s;
}

}  // namespace deferlab
