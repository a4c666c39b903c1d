#include "dsmc/value_model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "dsmc/dynamics.hpp"
#include "dsmc/rng.hpp"

namespace dsmc {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("value_model: " + msg);
}

constexpr int kCheckpointVersion = 1;

}  // namespace

Mlp::Mlp(int input, int hidden, int output, int hidden_layers)
    : input_(input), hidden_(hidden), output_(output),
      n_hidden_layers_(hidden_layers) {
  require(input > 0 && hidden > 0 && output > 0 && hidden_layers >= 1,
          "bad network shape");
  int off = 0;
  int in = input;
  for (int l = 0; l < hidden_layers; ++l) {
    layers_.push_back({off, off + hidden * in, hidden, in});
    off += hidden * in + hidden;
    in = hidden;
  }
  layers_.push_back({off, off + output * in, output, in});
  off += output * in + output;
  params_ = Eigen::VectorXd::Zero(off);
}

void Mlp::init_random(std::uint64_t seed) {
  RandomStream rng(seed);
  for (const Layer& L : layers_) {
    const double s = 1.0 / std::sqrt(static_cast<double>(L.cols));
    for (int k = 0; k < L.rows * L.cols; ++k)
      params_[L.w_off + k] = rng.uniform(-s, s);
    for (int k = 0; k < L.rows; ++k) params_[L.b_off + k] = 0.0;
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x, Cache* cache) const {
  require(x.size() == input_, "input size mismatch");
  if (cache) {
    cache->input = x;
    cache->act.clear();
  }
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const Eigen::Map<const Eigen::MatrixXd> W(params_.data() + L.w_off, L.rows,
                                              L.cols);
    const Eigen::Map<const Eigen::VectorXd> b(params_.data() + L.b_off, L.rows);
    Eigen::VectorXd z = W * a + b;
    if (l + 1 < layers_.size()) {
      a = z.array().tanh();
      if (cache) cache->act.push_back(a);
    } else {
      a = z;
    }
  }
  return a;
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::VectorXd& gout,
                              Eigen::VectorXd& grad) const {
  require(grad.size() == params_.size(), "gradient buffer size mismatch");
  require(gout.size() == output_, "output gradient size mismatch");
  require(static_cast<int>(cache.act.size()) == n_hidden_layers_,
          "stale forward cache");

  Eigen::VectorXd gz = gout;
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const Layer& L = layers_[l];
    const Eigen::Map<const Eigen::MatrixXd> W(params_.data() + L.w_off, L.rows,
                                              L.cols);
    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + L.w_off, L.rows, L.cols);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + L.b_off, L.rows);

    const Eigen::VectorXd& below = l == 0 ? cache.input : cache.act[l - 1];
    gW.noalias() += gz * below.transpose();
    gb += gz;
    Eigen::VectorXd ga = W.transpose() * gz;
    if (l == 0) return ga;
    gz = ga.cwiseProduct(
        (1.0 - cache.act[l - 1].array().square()).matrix());
  }
  return {};
}

void ValueModel::init(std::uint64_t seed) {
  const int in = obs_dim(r);
  grad_net = Mlp(in, hidden, kAgentDim, hidden_layers);
  value_net = Mlp(in, hidden, 1, hidden_layers);
  grad_net.init_random(mix64(seed, 0x6772616421ULL));
  value_net.init_random(mix64(seed, 0x76616c7565ULL));
}

int ValueModel::param_count() const {
  return grad_net.param_count() + value_net.param_count();
}

Eigen::VectorXd ValueModel::flat_params() const {
  Eigen::VectorXd theta(param_count());
  theta.head(grad_net.param_count()) = grad_net.params();
  theta.tail(value_net.param_count()) = value_net.params();
  return theta;
}

void ValueModel::set_flat_params(const Eigen::VectorXd& theta) {
  require(theta.size() == param_count(), "flat parameter size mismatch");
  grad_net.params() = theta.head(grad_net.param_count());
  value_net.params() = theta.tail(value_net.param_count());
}

void ValueModel::save(const std::string& path) const {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["r"] = r;
  j["hidden"] = hidden;
  j["hidden_layers"] = hidden_layers;
  j["grad_net"] = std::vector<double>(
      grad_net.params().data(), grad_net.params().data() + grad_net.param_count());
  j["value_net"] = std::vector<double>(
      value_net.params().data(),
      value_net.params().data() + value_net.param_count());
  std::ofstream out(path);
  require(out.good(), "cannot write checkpoint " + path);
  out << j.dump(1) << '\n';
}

ValueModel ValueModel::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read checkpoint " + path);
  nlohmann::json j;
  in >> j;
  require(j.value("format_version", -1) == kCheckpointVersion,
          "unsupported checkpoint format version in " + path);

  ValueModel m;
  m.r = j.at("r").get<int>();
  m.hidden = j.at("hidden").get<int>();
  m.hidden_layers = j.at("hidden_layers").get<int>();
  m.init(0);
  const auto gp = j.at("grad_net").get<std::vector<double>>();
  const auto vp = j.at("value_net").get<std::vector<double>>();
  require(static_cast<int>(gp.size()) == m.grad_net.param_count() &&
              static_cast<int>(vp.size()) == m.value_net.param_count(),
          "checkpoint parameter counts do not match its declared shape");
  m.grad_net.params() = Eigen::Map<const Eigen::VectorXd>(gp.data(), gp.size());
  m.value_net.params() = Eigen::Map<const Eigen::VectorXd>(vp.data(), vp.size());
  return m;
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m.size() != params.size()) {
    m = Eigen::VectorXd::Zero(params.size());
    v = Eigen::VectorXd::Zero(params.size());
  }
  if (!grad.allFinite()) {
    ++skipped;
    return;
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  params -= (lr / bc1) * m.cwiseQuotient(
                ((v / bc2).cwiseSqrt().array() + eps).matrix());
}

}  // namespace dsmc
