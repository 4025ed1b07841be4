#include "mgpin/mlp.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "mgpin/error.hpp"
#include "mgpin/textio.hpp"

namespace mgpin {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_shape(const MlpModel& m) {
  if (m.layer_sizes.size() < 2) throw InvalidArgument("MLP needs at least an input and an output layer");
  for (int s : m.layer_sizes)
    if (s < 1) throw InvalidArgument("MLP layer sizes must be >= 1");
  const auto n = m.layer_sizes.size() - 1;
  if (m.weights.size() != n || m.biases.size() != n) throw InvalidArgument("MLP layer count mismatch");
  for (std::size_t l = 0; l < n; ++l)
    if (m.weights[l].rows() != m.layer_sizes[l + 1] || m.weights[l].cols() != m.layer_sizes[l] ||
        m.biases[l].size() != m.layer_sizes[l + 1])
      throw InvalidArgument(fmt::format("MLP layer {} has inconsistent dimensions", l + 1));
  if (m.feature_mean.size() != m.input_size() || m.feature_scale.size() != m.input_size())
    throw InvalidArgument("MLP feature statistics do not match the input size");
}

}  // namespace

MlpModel MlpModel::create(const std::vector<int>& layer_sizes, Rng& rng) {
  MlpModel m;
  m.layer_sizes = layer_sizes;
  if (layer_sizes.size() < 2) throw InvalidArgument("MLP needs at least an input and an output layer");
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l], out = layer_sizes[l + 1];
    if (in < 1 || out < 1) throw InvalidArgument("MLP layer sizes must be >= 1");
    const double sd = std::sqrt(2.0 / in);
    Eigen::MatrixXd w(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) w(i, j) = sd * standard_normal(rng);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  m.feature_mean = Eigen::VectorXd::Zero(layer_sizes.front());
  m.feature_scale = Eigen::VectorXd::Ones(layer_sizes.front());
  return m;
}

Eigen::VectorXd MlpModel::standardize(const Eigen::VectorXd& x) const {
  if (x.size() != input_size())
    throw InvalidArgument(fmt::format("MLP expects {} features, got {}", input_size(), x.size()));
  return (x - feature_mean).cwiseQuotient(feature_scale);
}

Eigen::MatrixXd MlpModel::logits(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd a = z;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd h = (weights[l] * a).colwise() + biases[l];
    if (l + 1 < layer_count()) h = h.cwiseMax(0.0);
    a = std::move(h);
  }
  return a;
}

Eigen::VectorXd MlpModel::predict(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out = logits(standardize(x));
  for (auto& v : out) v = sigmoid(v);
  return out;
}

long MlpModel::parameter_count() const {
  long n = 0;
  for (int l = 0; l < layer_count(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

Eigen::VectorXd MlpModel::parameters() const {
  Eigen::VectorXd p(parameter_count());
  long k = 0;
  for (int l = 0; l < layer_count(); ++l) {
    for (long i = 0; i < weights[l].rows(); ++i)
      for (long j = 0; j < weights[l].cols(); ++j) p(k++) = weights[l](i, j);
    for (long i = 0; i < biases[l].size(); ++i) p(k++) = biases[l](i);
  }
  return p;
}

void MlpModel::set_parameters(const Eigen::VectorXd& p) {
  if (p.size() != parameter_count()) throw InvalidArgument("MLP parameter vector has the wrong length");
  long k = 0;
  for (int l = 0; l < layer_count(); ++l) {
    for (long i = 0; i < weights[l].rows(); ++i)
      for (long j = 0; j < weights[l].cols(); ++j) weights[l](i, j) = p(k++);
    for (long i = 0; i < biases[l].size(); ++i) biases[l](i) = p(k++);
  }
}

double bce_loss(const MlpModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, Eigen::VectorXd* grad) {
  const int L = model.layer_count();
  const long n = z.cols();
  if (z.rows() != model.input_size() || y.rows() != model.output_size() || y.cols() != n)
    throw InvalidArgument("bce_loss: dimension mismatch");
  if (n == 0) throw InvalidArgument("bce_loss: empty batch");

  std::vector<Eigen::MatrixXd> act(static_cast<std::size_t>(L + 1));
  act[0] = z;
  for (int l = 0; l < L; ++l) {
    Eigen::MatrixXd h = (model.weights[l] * act[l]).colwise() + model.biases[l];
    if (l + 1 < L) h = h.cwiseMax(0.0);
    act[l + 1] = std::move(h);
  }
  const Eigen::MatrixXd& logit = act[L];
  const double denom = static_cast<double>(n) * static_cast<double>(y.rows());
  double loss = 0.0;
  for (long c = 0; c < n; ++c)
    for (long r = 0; r < y.rows(); ++r) {
      const double a = logit(r, c);
      loss += std::max(a, 0.0) - a * y(r, c) + std::log1p(std::exp(-std::abs(a)));
    }
  loss /= denom;
  if (!grad) return loss;

  // Reverse accumulation through the layer chain.
  Eigen::MatrixXd delta(logit.rows(), n);
  for (long c = 0; c < n; ++c)
    for (long r = 0; r < logit.rows(); ++r) delta(r, c) = (sigmoid(logit(r, c)) - y(r, c)) / denom;
  std::vector<Eigen::MatrixXd> gw(static_cast<std::size_t>(L));
  std::vector<Eigen::VectorXd> gb(static_cast<std::size_t>(L));
  for (int l = L - 1; l >= 0; --l) {
    gw[l] = delta * act[l].transpose();
    gb[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = model.weights[l].transpose() * delta;
      delta = back.cwiseProduct((act[l].array() > 0.0).cast<double>().matrix());
    }
  }
  grad->resize(model.parameter_count());
  long k = 0;
  for (int l = 0; l < L; ++l) {
    for (long i = 0; i < gw[l].rows(); ++i)
      for (long j = 0; j < gw[l].cols(); ++j) (*grad)(k++) = gw[l](i, j);
    for (long i = 0; i < gb[l].size(); ++i) (*grad)(k++) = gb[l](i);
  }
  return loss;
}

MlpModel train_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const TrainParams& params,
                   TrainReport* report) {
  const long n = x.cols();
  if (n == 0) throw InvalidArgument("training set is empty");
  if (y.cols() != n) throw InvalidArgument("feature and label counts differ");
  if (params.epochs < 0 || params.batch_size < 1) throw InvalidArgument("invalid epochs or batch size");
  if (!(params.validation_split >= 0.0 && params.validation_split < 1.0))
    throw InvalidArgument("validation split must lie in [0, 1)");
  if (!(params.learning_rate > 0.0) || !(params.momentum >= 0.0 && params.momentum < 1.0))
    throw InvalidArgument("invalid learning rate or momentum");

  Rng rng(params.seed);
  std::vector<long> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0L);
  for (long i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, static_cast<std::uint64_t>(i + 1))]);
  long n_val = static_cast<long>(std::floor(params.validation_split * static_cast<double>(n)));
  if (n_val >= n) n_val = n - 1;
  const long n_train = n - n_val;

  std::vector<int> sizes{static_cast<int>(x.rows())};
  sizes.insert(sizes.end(), params.hidden.begin(), params.hidden.end());
  sizes.push_back(static_cast<int>(y.rows()));
  MlpModel model = MlpModel::create(sizes, rng);

  // Feature statistics from the training part only.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.rows());
  for (long i = 0; i < n_train; ++i) mean += x.col(order[i]);
  mean /= static_cast<double>(n_train);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(x.rows());
  for (long i = 0; i < n_train; ++i) var += (x.col(order[i]) - mean).cwiseAbs2();
  var /= static_cast<double>(n_train);
  model.feature_mean = mean;
  model.feature_scale = var.cwiseSqrt().unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });

  Eigen::MatrixXd z_train(x.rows(), n_train), y_train(y.rows(), n_train);
  for (long i = 0; i < n_train; ++i) {
    z_train.col(i) = model.standardize(x.col(order[i]));
    y_train.col(i) = y.col(order[i]);
  }
  Eigen::MatrixXd z_val(x.rows(), n_val), y_val(y.rows(), n_val);
  for (long i = 0; i < n_val; ++i) {
    z_val.col(i) = model.standardize(x.col(order[n_train + i]));
    y_val.col(i) = y.col(order[n_train + i]);
  }
  if (report) {
    *report = TrainReport{};
    report->train_samples = static_cast<int>(n_train);
    report->validation_samples = static_cast<int>(n_val);
  }

  Eigen::VectorXd params_vec = model.parameters();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(params_vec.size());
  Eigen::VectorXd grad;
  std::vector<long> idx(static_cast<std::size_t>(n_train));
  std::iota(idx.begin(), idx.end(), 0L);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (long i = n_train - 1; i > 0; --i)
      std::swap(idx[i], idx[uniform_index(rng, static_cast<std::uint64_t>(i + 1))]);
    for (long start = 0; start < n_train; start += params.batch_size) {
      const long len = std::min<long>(params.batch_size, n_train - start);
      Eigen::MatrixXd zb(x.rows(), len), yb(y.rows(), len);
      for (long i = 0; i < len; ++i) {
        zb.col(i) = z_train.col(idx[start + i]);
        yb.col(i) = y_train.col(idx[start + i]);
      }
      bce_loss(model, zb, yb, &grad);
      velocity = params.momentum * velocity - params.learning_rate * grad;
      params_vec += velocity;
      model.set_parameters(params_vec);
    }
    const double tl = bce_loss(model, z_train, y_train);
    if (!std::isfinite(tl)) throw NumericFailure(fmt::format("training diverged at epoch {}", epoch + 1));
    if (report) {
      report->train_loss.push_back(tl);
      if (n_val > 0) report->validation_loss.push_back(bce_loss(model, z_val, y_val));
    }
  }
  return model;
}

std::string format_model(const MlpModel& model) {
  check_shape(model);
  std::string s = "mlp 1\n";
  s += "layers";
  for (int v : model.layer_sizes) s += fmt::format(" {}", v);
  s += "\nhidden_activation relu\noutput_activation logistic\n";
  const auto vec_line = [](const char* tag, const Eigen::VectorXd& v) {
    std::string line = tag;
    for (double d : v) line += " " + textio::format_double(d);
    return line + "\n";
  };
  s += vec_line("feature_mean", model.feature_mean);
  s += vec_line("feature_scale", model.feature_scale);
  for (int l = 0; l < model.layer_count(); ++l) {
    s += fmt::format("weights {}\n", l + 1);
    for (long i = 0; i < model.weights[l].rows(); ++i) {
      std::string row;
      for (long j = 0; j < model.weights[l].cols(); ++j)
        row += (j ? " " : "") + textio::format_double(model.weights[l](i, j));
      s += row + "\n";
    }
    s += vec_line("bias", model.biases[l]);
  }
  return s;
}

MlpModel parse_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  const auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(fmt::format("model file truncated before {}", what));
    return textio::split(textio::trim(line), ' ');
  };
  auto tok = next("header");
  if (tok.size() != 2 || tok[0] != "mlp" || tok[1] != "1") throw ParseError("not an mlp model file");
  MlpModel m;
  tok = next("layers");
  if (tok.empty() || tok[0] != "layers") throw ParseError("model file: expected 'layers'");
  for (std::size_t i = 1; i < tok.size(); ++i) m.layer_sizes.push_back(textio::to_int(tok[i]));
  tok = next("hidden_activation");
  if (tok.size() != 2 || tok[1] != "relu") throw ParseError("model file: unsupported hidden activation");
  tok = next("output_activation");
  if (tok.size() != 2 || tok[1] != "logistic") throw ParseError("model file: unsupported output activation");
  if (m.layer_sizes.size() < 2) throw ParseError("model file: need at least two layers");
  const auto read_vec = [&](const char* tag, long len) {
    auto t = next(tag);
    if (t.empty() || t[0] != tag || static_cast<long>(t.size()) != len + 1)
      throw ParseError(fmt::format("model file: bad '{}' line", tag));
    Eigen::VectorXd v(len);
    for (long i = 0; i < len; ++i) v(i) = textio::to_double(t[i + 1]);
    return v;
  };
  m.feature_mean = read_vec("feature_mean", m.layer_sizes.front());
  m.feature_scale = read_vec("feature_scale", m.layer_sizes.front());
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    tok = next("weights");
    if (tok.size() != 2 || tok[0] != "weights") throw ParseError("model file: expected 'weights'");
    Eigen::MatrixXd w(m.layer_sizes[l + 1], m.layer_sizes[l]);
    for (long i = 0; i < w.rows(); ++i) {
      auto r = next("weight row");
      if (static_cast<long>(r.size()) != w.cols()) throw ParseError("model file: weight row has the wrong length");
      for (long j = 0; j < w.cols(); ++j) w(i, j) = textio::to_double(r[j]);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(read_vec("bias", m.layer_sizes[l + 1]));
  }
  check_shape(m);
  return m;
}

MlpModel read_model(const std::filesystem::path& path) { return parse_model(textio::read_file(path)); }

}  // namespace mgpin
