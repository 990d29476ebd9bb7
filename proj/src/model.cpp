#include "recourse/model.hpp"

#include <cmath>

#include "recourse/rng.hpp"

namespace recourse {

namespace {

constexpr double kMinScale = 1e-12;

double activate(double v, Activation act) {
  return act == Activation::relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
}

double activate_slope(double pre, Activation act) {
  if (act == Activation::relu) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw ValidationError(std::string(what) + " contains non-finite values");
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<int> ArchSpec::layer_dims(int input_dim) const {
  std::vector<int> dims{input_dim};
  if (kind == ArchKind::mlp) {
    dims.insert(dims.end(), hidden.begin(), hidden.end());
  }
  dims.push_back(1);
  return dims;
}

int ArchSpec::param_count(int input_dim) const {
  const auto dims = layer_dims(input_dim);
  int n = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    n += dims[l + 1] * dims[l] + dims[l + 1];
  }
  return n;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (epochs <= 0) throw ValidationError("epochs must be positive");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (l2 < 0.0) throw ValidationError("l2 penalty must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ValidationError("momentum must be in [0, 1)");
  }
}

Mlp::Mlp(int input_dim, ArchSpec arch)
    : input_dim_(input_dim), arch_(std::move(arch)) {
  if (input_dim_ <= 0) throw ValidationError("model input dimension must be > 0");
  for (int h : arch_.hidden) {
    if (h <= 0) throw ValidationError("hidden layer sizes must be positive");
  }
  dims_ = arch_.layer_dims(input_dim_);
  params_ = Eigen::VectorXd::Zero(arch_.param_count(input_dim_));
}

void Mlp::set_params(Eigen::VectorXd p) {
  if (p.size() != params_.size()) {
    throw ShapeMismatch("parameter count does not match architecture");
  }
  params_ = std::move(p);
}

void Mlp::init_params(std::uint64_t seed) {
  Rng rng(seed);
  int offset = 0;
  for (size_t l = 0; l + 1 < dims_.size(); ++l) {
    const int rows = dims_[l + 1];
    const int cols = dims_[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int i = 0; i < rows * cols; ++i) {
      params_[offset + i] = rng.uniform(-bound, bound);
    }
    offset += rows * cols;
    params_.segment(offset, rows).setZero();
    offset += rows;
  }
}

namespace {

struct LayerView {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      W;
  Eigen::Map<const Eigen::VectorXd> b;
};

std::vector<LayerView> layer_views(const Eigen::VectorXd& params,
                                   const std::vector<int>& dims) {
  std::vector<LayerView> layers;
  int offset = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int rows = dims[l + 1];
    const int cols = dims[l];
    layers.push_back(
        {{params.data() + offset, rows, cols},
         {params.data() + offset + rows * cols, rows}});
    offset += rows * cols + rows;
  }
  return layers;
}

}  // namespace

double Mlp::value(const Eigen::VectorXd& z) const {
  if (z.size() != input_dim_) throw ShapeMismatch("input length mismatch");
  const auto layers = layer_views(params_, dims_);
  Eigen::VectorXd a = z;
  for (size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd pre = layers[l].W * a + layers[l].b;
    if (l + 1 == layers.size()) return pre[0];
    for (int i = 0; i < pre.size(); ++i) pre[i] = activate(pre[i], arch_.activation);
    a = std::move(pre);
  }
  return a[0];  // no layers cannot happen: there is always an output layer
}

Eigen::VectorXd Mlp::value_batch(const Eigen::MatrixXd& Z) const {
  if (Z.cols() != input_dim_) throw ShapeMismatch("input width mismatch");
  const auto layers = layer_views(params_, dims_);
  Eigen::MatrixXd a = Z;
  for (size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd pre =
        (a * layers[l].W.transpose()).rowwise() + layers[l].b.transpose();
    if (l + 1 == layers.size()) return pre.col(0);
    if (arch_.activation == Activation::relu) {
      a = pre.cwiseMax(0.0);
    } else {
      a = pre.array().tanh().matrix();
    }
  }
  return a.col(0);
}

Eigen::VectorXd Mlp::input_gradient(const Eigen::VectorXd& z) const {
  if (z.size() != input_dim_) throw ShapeMismatch("input length mismatch");
  const auto layers = layer_views(params_, dims_);
  std::vector<Eigen::VectorXd> pres;
  Eigen::VectorXd a = z;
  for (size_t l = 0; l + 1 < layers.size(); ++l) {
    Eigen::VectorXd pre = layers[l].W * a + layers[l].b;
    pres.push_back(pre);
    for (int i = 0; i < pre.size(); ++i) pre[i] = activate(pre[i], arch_.activation);
    a = std::move(pre);
  }
  // d out / d (last hidden activation)
  Eigen::VectorXd g = layers.back().W.row(0).transpose();
  for (size_t l = layers.size() - 1; l-- > 0;) {
    const Eigen::VectorXd& pre = pres[l];
    for (int i = 0; i < g.size(); ++i) {
      g[i] *= activate_slope(pre[i], arch_.activation);
    }
    g = layers[l].W.transpose() * g;
  }
  return g;
}

Eigen::VectorXd Mlp::param_gradient(const Eigen::MatrixXd& Z,
                                    const Eigen::VectorXd& dout) const {
  const auto layers = layer_views(params_, dims_);
  std::vector<Eigen::MatrixXd> acts;   // activations per layer input
  std::vector<Eigen::MatrixXd> pres;   // pre-activations of hidden layers
  acts.push_back(Z);
  for (size_t l = 0; l + 1 < layers.size(); ++l) {
    Eigen::MatrixXd pre =
        (acts.back() * layers[l].W.transpose()).rowwise() +
        layers[l].b.transpose();
    pres.push_back(pre);
    if (arch_.activation == Activation::relu) {
      acts.push_back(pre.cwiseMax(0.0));
    } else {
      acts.push_back(pre.array().tanh().matrix());
    }
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  std::vector<int> offsets;
  {
    int offset = 0;
    for (size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets.push_back(offset);
      offset += dims_[l + 1] * dims_[l] + dims_[l + 1];
    }
  }

  // delta: n x width of current layer's output
  Eigen::MatrixXd delta = dout;  // output layer is linear, width 1
  for (size_t l = layers.size(); l-- > 0;) {
    const int rows = dims_[l + 1];
    const int cols = dims_[l];
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        gW(grad.data() + offsets[l], rows, cols);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets[l] + rows * cols,
                                   rows);
    gW = delta.transpose() * acts[l];
    gb = delta.colwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = delta * layers[l].W;  // n x dims_[l]
    const Eigen::MatrixXd& pre = pres[l - 1];
    if (arch_.activation == Activation::relu) {
      delta = back.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    } else {
      delta = back.cwiseProduct(
          (1.0 - pre.array().tanh().square()).matrix());
    }
  }
  return grad;
}

void Mlp::add_weight_decay(double l2, Eigen::VectorXd& grad) const {
  if (l2 == 0.0) return;
  int offset = 0;
  for (size_t l = 0; l + 1 < dims_.size(); ++l) {
    const int nw = dims_[l + 1] * dims_[l];
    grad.segment(offset, nw) += l2 * params_.segment(offset, nw);
    offset += nw + dims_[l + 1];
  }
}

Eigen::MatrixXd Standardizer::apply_rows(const Eigen::MatrixXd& X) const {
  return (X.rowwise() - mean.transpose()).array().rowwise() /
         scale.transpose().array();
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X,
                               const std::vector<bool>& passthrough) {
  Standardizer s;
  s.mean = Eigen::VectorXd::Zero(X.cols());
  s.scale = Eigen::VectorXd::Ones(X.cols());
  for (int c = 0; c < X.cols(); ++c) {
    if (!passthrough.empty() && passthrough[static_cast<size_t>(c)]) continue;
    const double m = X.col(c).mean();
    const double var = (X.col(c).array() - m).square().sum() /
                       static_cast<double>(X.rows());
    const double sd = std::sqrt(var);
    s.mean[c] = m;
    s.scale[c] = sd > kMinScale ? sd : 1.0;  // constant column fallback
  }
  return s;
}

RegressorModel::RegressorModel(std::vector<std::string> input_names, Mlp net,
                               Standardizer input_std, double output_mean,
                               double output_scale)
    : input_names_(std::move(input_names)),
      net_(std::move(net)),
      input_std_(std::move(input_std)),
      output_mean_(output_mean),
      output_scale_(output_scale) {
  if (static_cast<int>(input_names_.size()) != net_.input_dim()) {
    throw ShapeMismatch("input names do not match network width");
  }
}

double RegressorModel::predict(const Eigen::VectorXd& parent_values) const {
  if (parent_values.size() != net_.input_dim()) {
    throw ShapeMismatch("parent value count mismatch");
  }
  return output_mean_ + output_scale_ * net_.value(input_std_.apply(parent_values));
}

Eigen::VectorXd RegressorModel::predict_batch(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != net_.input_dim()) throw ShapeMismatch("input width mismatch");
  return (output_scale_ * net_.value_batch(input_std_.apply_rows(rows)).array() +
          output_mean_)
      .matrix();
}

Eigen::VectorXd RegressorModel::input_gradient(
    const Eigen::VectorXd& parent_values) const {
  if (parent_values.size() != net_.input_dim()) {
    throw ShapeMismatch("parent value count mismatch");
  }
  Eigen::VectorXd g = net_.input_gradient(input_std_.apply(parent_values));
  return (output_scale_ * g.array() / input_std_.scale.array()).matrix();
}

ClassifierModel::ClassifierModel(std::vector<std::string> input_names, Mlp net,
                                 Standardizer input_std, double train_accuracy)
    : input_names_(std::move(input_names)),
      net_(std::move(net)),
      input_std_(std::move(input_std)),
      train_accuracy_(train_accuracy) {
  if (static_cast<int>(input_names_.size()) != net_.input_dim()) {
    throw ShapeMismatch("input names do not match network width");
  }
}

double ClassifierModel::logit(const Eigen::VectorXd& x) const {
  if (x.size() != net_.input_dim()) throw ShapeMismatch("input length mismatch");
  return net_.value(input_std_.apply(x));
}

double ClassifierModel::score(const Eigen::VectorXd& x) const {
  return sigmoid(logit(x));
}

Eigen::VectorXd ClassifierModel::logit_gradient(const Eigen::VectorXd& x) const {
  if (x.size() != net_.input_dim()) throw ShapeMismatch("input length mismatch");
  Eigen::VectorXd g = net_.input_gradient(input_std_.apply(x));
  return (g.array() / input_std_.scale.array()).matrix();
}

Eigen::VectorXd ClassifierModel::input_gradient(const Eigen::VectorXd& x) const {
  const double s = score(x);
  return s * (1.0 - s) * logit_gradient(x);
}

Eigen::VectorXd ClassifierModel::score_batch(const Eigen::MatrixXd& rows) const {
  Eigen::VectorXd logits = net_.value_batch(input_std_.apply_rows(rows));
  for (int i = 0; i < logits.size(); ++i) logits[i] = sigmoid(logits[i]);
  return logits;
}

namespace {

// Shared descent loop. `dloss` maps (outputs, targets) to per-row dL/dout and
// returns the batch loss.
template <typename LossGrad>
void descend(Mlp& net, const Eigen::MatrixXd& Z, const Eigen::VectorXd& t,
             const TrainConfig& cfg, LossGrad&& dloss) {
  const int n = static_cast<int>(Z.rows());
  const int batch = std::min<int>(cfg.batch_size, n);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(net.params().size());
  Eigen::VectorXd params = net.params();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int start = 0; start < n; start += batch) {
      const int len = std::min(batch, n - start);
      const auto Zb = Z.middleRows(start, len);
      const auto tb = t.segment(start, len);
      Eigen::VectorXd out = net.value_batch(Zb);
      Eigen::VectorXd dout(len);
      const double loss = dloss(out, tb, dout);
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("training loss diverged");
      }
      Eigen::VectorXd grad = net.param_gradient(Zb, dout);
      net.add_weight_decay(cfg.l2, grad);
      velocity = cfg.momentum * velocity - cfg.learning_rate * grad;
      params += velocity;
      net.set_params(params);
    }
  }
}

}  // namespace

RegressorModel fit_regressor(const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& targets,
                             std::vector<std::string> input_names,
                             const ArchSpec& arch, const TrainConfig& cfg,
                             const std::vector<bool>& passthrough) {
  cfg.validate();
  if (inputs.rows() != targets.size()) {
    throw ShapeMismatch("inputs and targets row counts differ");
  }
  if (inputs.rows() < 2) throw DegenerateData("need at least 2 training rows");
  if (static_cast<int>(input_names.size()) != inputs.cols()) {
    throw ShapeMismatch("input name count does not match input width");
  }
  check_finite(inputs, "inputs");
  check_finite(targets, "targets");

  Standardizer in_std = Standardizer::fit(inputs, passthrough);
  const double out_mean = targets.mean();
  const double out_sd = std::sqrt(
      (targets.array() - out_mean).square().sum() / static_cast<double>(targets.size()));
  const double out_scale = out_sd > kMinScale ? out_sd : 1.0;

  Eigen::MatrixXd Z = in_std.apply_rows(inputs);
  Eigen::VectorXd t = (targets.array() - out_mean) / out_scale;

  Mlp net(static_cast<int>(inputs.cols()), arch);
  net.init_params(cfg.seed);
  descend(net, Z, t, cfg,
          [](const Eigen::VectorXd& out, const auto& tb, Eigen::VectorXd& dout) {
            const int len = static_cast<int>(out.size());
            dout = (out - tb) / static_cast<double>(len);
            return 0.5 * (out - tb).squaredNorm() / static_cast<double>(len);
          });
  return RegressorModel(std::move(input_names), std::move(net), std::move(in_std),
                        out_mean, out_scale);
}

ClassifierModel fit_classifier(const Eigen::MatrixXd& X,
                               const Eigen::VectorXi& y,
                               std::vector<std::string> input_names,
                               const ArchSpec& arch, const TrainConfig& cfg,
                               const std::vector<bool>& passthrough) {
  cfg.validate();
  if (X.rows() != y.size()) throw ShapeMismatch("X and y row counts differ");
  if (X.rows() < 2) throw DegenerateData("need at least 2 training rows");
  if (static_cast<int>(input_names.size()) != X.cols()) {
    throw ShapeMismatch("input name count does not match input width");
  }
  check_finite(X, "X");
  bool has0 = false, has1 = false;
  for (int i = 0; i < y.size(); ++i) {
    if (y[i] == 0) {
      has0 = true;
    } else if (y[i] == 1) {
      has1 = true;
    } else {
      throw ValidationError("labels must be 0 or 1");
    }
  }
  if (!has0 || !has1) throw SingleClassData("both classes must be present");

  Standardizer in_std = Standardizer::fit(X, passthrough);
  Eigen::MatrixXd Z = in_std.apply_rows(X);
  Eigen::VectorXd t = y.cast<double>();

  Mlp net(static_cast<int>(X.cols()), arch);
  net.init_params(cfg.seed);
  descend(net, Z, t, cfg,
          [](const Eigen::VectorXd& out, const auto& tb, Eigen::VectorXd& dout) {
            const int len = static_cast<int>(out.size());
            double loss = 0.0;
            dout.resize(len);
            for (int i = 0; i < len; ++i) {
              const double o = out[i];
              // softplus(o) - y*o, computed stably
              loss += std::max(o, 0.0) + std::log1p(std::exp(-std::abs(o))) -
                      tb[i] * o;
              dout[i] = (sigmoid(o) - tb[i]) / static_cast<double>(len);
            }
            return loss / static_cast<double>(len);
          });

  Eigen::VectorXd logits = net.value_batch(Z);
  int correct = 0;
  for (int i = 0; i < logits.size(); ++i) {
    correct += ((logits[i] > 0.0 ? 1 : 0) == y[i]) ? 1 : 0;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(y.size());
  return ClassifierModel(std::move(input_names), std::move(net), std::move(in_std),
                         acc);
}

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i].get<double>();
  return v;
}

nlohmann::json standardizer_to_json(const Standardizer& s) {
  return {{"mean", vector_to_json(s.mean)}, {"scale", vector_to_json(s.scale)}};
}

Standardizer standardizer_from_json(const nlohmann::json& j) {
  Standardizer s;
  s.mean = vector_from_json(j.at("mean"));
  s.scale = vector_from_json(j.at("scale"));
  return s;
}

}  // namespace

nlohmann::json arch_to_json(const ArchSpec& a) {
  nlohmann::json j;
  j["kind"] = a.kind == ArchKind::linear ? "linear" : "mlp";
  j["hidden"] = a.hidden;
  j["activation"] = a.activation == Activation::relu ? "relu" : "tanh";
  return j;
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec a;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") {
    a.kind = ArchKind::linear;
  } else if (kind == "mlp") {
    a.kind = ArchKind::mlp;
  } else {
    throw ParseError("unknown architecture kind '" + kind + "'");
  }
  a.hidden = j.value("hidden", std::vector<int>{});
  const std::string act = j.value("activation", "tanh");
  if (act == "relu") {
    a.activation = Activation::relu;
  } else if (act == "tanh") {
    a.activation = Activation::tanh;
  } else {
    throw ParseError("unknown activation '" + act + "'");
  }
  return a;
}

nlohmann::json RegressorModel::to_json() const {
  nlohmann::json j;
  j["type"] = "regressor";
  j["architecture"] = arch_to_json(net_.arch());
  j["input_names"] = input_names_;
  j["standardization"] = standardizer_to_json(input_std_);
  j["output_mean"] = output_mean_;
  j["output_scale"] = output_scale_;
  j["parameters"] = vector_to_json(net_.params());
  return j;
}

RegressorModel RegressorModel::from_json(const nlohmann::json& j) {
  auto names = j.at("input_names").get<std::vector<std::string>>();
  Mlp net(static_cast<int>(names.size()), arch_from_json(j.at("architecture")));
  net.set_params(vector_from_json(j.at("parameters")));
  return RegressorModel(std::move(names), std::move(net),
                        standardizer_from_json(j.at("standardization")),
                        j.at("output_mean").get<double>(),
                        j.at("output_scale").get<double>());
}

nlohmann::json ClassifierModel::to_json() const {
  nlohmann::json j;
  j["type"] = "classifier";
  j["architecture"] = arch_to_json(net_.arch());
  j["input_names"] = input_names_;
  j["standardization"] = standardizer_to_json(input_std_);
  j["train_accuracy"] = train_accuracy_;
  j["parameters"] = vector_to_json(net_.params());
  return j;
}

ClassifierModel ClassifierModel::from_json(const nlohmann::json& j) {
  auto names = j.at("input_names").get<std::vector<std::string>>();
  Mlp net(static_cast<int>(names.size()), arch_from_json(j.at("architecture")));
  net.set_params(vector_from_json(j.at("parameters")));
  return ClassifierModel(std::move(names), std::move(net),
                         standardizer_from_json(j.at("standardization")),
                         j.value("train_accuracy", 0.0));
}

}  // namespace recourse
