#include "uam/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "uam/errors.hpp"
#include "uam/rng.hpp"

namespace uam::nn {

const char* block_name(Block b) {
  static constexpr std::array<const char*, kNumBlocks> kNames = {
      "own_w", "own_b", "nbr_w", "nbr_b", "att_w1", "ctx_w2", "trunk_w", "trunk_b", "pi_w", "pi_b", "value_w", "value_b",
  };
  return kNames[static_cast<int>(b)];
}

ParameterSet::ParameterSet(const Dims& d) : dims_(d) {
  const int h = d.hidden;
  shapes_ = {{{h, d.own_in}, {h, 1}, {h, d.nbr_in}, {h, 1}, {h, h}, {h, h}, {h, 2 * h}, {h, 1},
              {d.actions, h}, {d.actions, 1}, {1, h}, {1, 1}}};
  std::size_t off = 0;
  for (int b = 0; b < kNumBlocks; ++b) {
    offsets_[b] = off;
    off += static_cast<std::size_t>(shapes_[b].first) * static_cast<std::size_t>(shapes_[b].second);
  }
  data_.assign(off, 0.0);
}

MatrixMap ParameterSet::operator[](Block b) {
  const auto [r, c] = shape(b);
  return MatrixMap(data_.data() + offset(b), r, c);
}

ConstMatrixMap ParameterSet::operator[](Block b) const {
  const auto [r, c] = shape(b);
  return ConstMatrixMap(data_.data() + offset(b), r, c);
}

void ParameterSet::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool ParameterSet::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ParameterSet init_params(std::uint64_t seed, const Dims& dims) {
  if (dims.own_in != env::kOwnshipFeatures || dims.nbr_in != env::kNeighborFeatures)
    throw ConfigError("network input widths must be " + std::to_string(env::kOwnshipFeatures) + " (ownship) and " +
                      std::to_string(env::kNeighborFeatures) + " (neighbor)");
  if (dims.actions != sim::kNumActions) throw ConfigError("policy head must have 3 outputs");
  if (dims.hidden <= 0) throw ConfigError("hidden width must be positive");

  ParameterSet p(dims);
  Rng rng(derive_seed(seed, 0x1417));
  auto fill = [&](Block b, double stddev) {
    auto m = p[b];
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = stddev * rng.normal();
  };
  const double h = dims.hidden;
  fill(Block::OwnW, std::sqrt(2.0 / dims.own_in));
  fill(Block::NbrW, std::sqrt(2.0 / dims.nbr_in));
  fill(Block::AttW1, 1.0 / h);
  fill(Block::CtxW2, std::sqrt(1.0 / h));
  fill(Block::TrunkW, std::sqrt(2.0 / (2.0 * h)));
  fill(Block::PiW, 0.01 * std::sqrt(1.0 / h));
  fill(Block::ValueW, std::sqrt(1.0 / h));
  return p;
}

namespace {

void relu_inplace(Matrix& m) { m = m.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& activated) { return (activated.array() > 0.0).cast<double>().matrix(); }

}  // namespace

void forward(const ParameterSet& p, std::span<const env::Observation> batch, ForwardCache& c) {
  const Dims& d = p.dims();
  const auto n = static_cast<Eigen::Index>(batch.size());
  c.nbr_offset.assign(batch.size() + 1, 0);
  for (std::size_t i = 0; i < batch.size(); ++i) c.nbr_offset[i + 1] = c.nbr_offset[i] + batch[i].neighbors.size();
  const auto m = static_cast<Eigen::Index>(c.nbr_offset.back());
  if (d.own_in != env::kOwnshipFeatures || d.nbr_in != env::kNeighborFeatures)
    throw ShapeError("parameter input widths do not match the observation encoding");

  c.xo.resize(d.own_in, n);
  c.xn.resize(d.nbr_in, m);
  std::vector<const env::NeighborFeatures*> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& obs = batch[static_cast<std::size_t>(i)];
    for (int k = 0; k < d.own_in; ++k) c.xo(k, i) = obs.ownship[static_cast<std::size_t>(k)];
    // Lexicographic order makes every reduction over neighbors independent of
    // the order they were listed in, so outputs are bitwise permutation-invariant.
    order.clear();
    for (const auto& f : obs.neighbors) order.push_back(&f);
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return *a < *b; });
    auto col = static_cast<Eigen::Index>(c.nbr_offset[static_cast<std::size_t>(i)]);
    for (const auto* f : order) {
      for (int k = 0; k < d.nbr_in; ++k) c.xn(k, col) = (*f)[static_cast<std::size_t>(k)];
      ++col;
    }
  }

  c.s = (p[Block::OwnW] * c.xo).colwise() + p[Block::OwnB].col(0);
  relu_inplace(c.s);
  c.hn = (p[Block::NbrW] * c.xn).colwise() + p[Block::NbrB].col(0);
  relu_inplace(c.hn);

  c.q = p[Block::AttW1].transpose() * c.s;
  c.alpha.resize(m);
  c.c = Matrix::Zero(d.hidden, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto off = static_cast<Eigen::Index>(c.nbr_offset[static_cast<std::size_t>(i)]);
    const auto cnt = static_cast<Eigen::Index>(c.nbr_offset[static_cast<std::size_t>(i) + 1]) - off;
    if (cnt == 0) continue;
    const auto hb = c.hn.middleCols(off, cnt);
    Vector score = hb.transpose() * c.q.col(i);
    score.array() -= score.maxCoeff();
    score = score.array().exp();
    score /= score.sum();
    c.alpha.segment(off, cnt) = score;
    c.c.col(i) = hb * score;
  }

  c.hs = (p[Block::CtxW2] * c.c).array().tanh().matrix();
  c.z.resize(2 * d.hidden, n);
  c.z.topRows(d.hidden) = c.s;
  c.z.bottomRows(d.hidden) = c.hs;
  c.t = (p[Block::TrunkW] * c.z).colwise() + p[Block::TrunkB].col(0);
  relu_inplace(c.t);

  c.logits = (p[Block::PiW] * c.t).colwise() + p[Block::PiB].col(0);
  c.log_probs.resize(d.actions, n);
  c.probs.resize(d.actions, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = c.logits.col(i).maxCoeff();
    const double lse = mx + std::log((c.logits.col(i).array() - mx).exp().sum());
    c.log_probs.col(i) = c.logits.col(i).array() - lse;
    c.probs.col(i) = c.log_probs.col(i).array().exp();
  }
  c.values = (p[Block::ValueW] * c.t).row(0).transpose().array() + p[Block::ValueB](0, 0);
}

Output forward(const ParameterSet& params, const env::Observation& obs) {
  ForwardCache cache;
  forward(params, std::span<const env::Observation>(&obs, 1), cache);
  Output out;
  for (int k = 0; k < 3; ++k) out.probs[static_cast<std::size_t>(k)] = cache.probs(k, 0);
  out.value = cache.values(0);
  return out;
}

void backward(const ParameterSet& p, const ForwardCache& c, const Matrix& d_logits, const Vector& d_values,
              ParameterSet& g) {
  const int h = p.dims().hidden;
  const Eigen::Index n = c.s.cols();

  g[Block::PiW] += d_logits * c.t.transpose();
  g[Block::PiB] += d_logits.rowwise().sum();
  g[Block::ValueW] += d_values.transpose() * c.t.transpose();
  g[Block::ValueB](0, 0) += d_values.sum();

  Matrix dt = p[Block::PiW].transpose() * d_logits + p[Block::ValueW].transpose() * d_values.transpose();
  dt = dt.cwiseProduct(relu_mask(c.t));
  g[Block::TrunkW] += dt * c.z.transpose();
  g[Block::TrunkB] += dt.rowwise().sum();

  const Matrix dz = p[Block::TrunkW].transpose() * dt;
  Matrix ds = dz.topRows(h);
  const Matrix da = dz.bottomRows(h).cwiseProduct((1.0 - c.hs.array().square()).matrix());
  g[Block::CtxW2] += da * c.c.transpose();
  const Matrix dc = p[Block::CtxW2].transpose() * da;

  Matrix dhn = Matrix::Zero(h, c.hn.cols());
  Matrix dq = Matrix::Zero(h, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto off = static_cast<Eigen::Index>(c.nbr_offset[static_cast<std::size_t>(i)]);
    const auto cnt = static_cast<Eigen::Index>(c.nbr_offset[static_cast<std::size_t>(i) + 1]) - off;
    if (cnt == 0) continue;
    const auto hb = c.hn.middleCols(off, cnt);
    const auto a = c.alpha.segment(off, cnt);
    const Vector dalpha = hb.transpose() * dc.col(i);
    const Vector dscore = a.cwiseProduct((dalpha.array() - a.dot(dalpha)).matrix());
    dhn.middleCols(off, cnt) += dc.col(i) * a.transpose() + c.q.col(i) * dscore.transpose();
    dq.col(i) = hb * dscore;
  }
  g[Block::AttW1] += c.s * dq.transpose();
  ds += p[Block::AttW1] * dq;

  ds = ds.cwiseProduct(relu_mask(c.s));
  g[Block::OwnW] += ds * c.xo.transpose();
  g[Block::OwnB] += ds.rowwise().sum();
  dhn = dhn.cwiseProduct(relu_mask(c.hn));
  g[Block::NbrW] += dhn * c.xn.transpose();
  g[Block::NbrB] += dhn.rowwise().sum();
}

double clipped_surrogate(double psi, double advantage, double epsilon) {
  const double clipped = std::clamp(psi, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(psi * advantage, clipped * advantage);
}

double huber(double x, double delta) {
  const double ax = std::abs(x);
  return ax <= delta ? 0.5 * x * x : delta * (ax - 0.5 * delta);
}

LossDiagnostics ppo_loss(const ParameterSet& params, std::span<const Sample> batch, const LossSpec& spec,
                         ParameterSet* grads) {
  if (batch.empty()) throw ShapeError("empty minibatch");
  std::vector<env::Observation> obs;
  obs.reserve(batch.size());
  for (const auto& s : batch) obs.push_back(s.obs);
  ForwardCache cache;
  forward(params, obs, cache);

  const auto n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  const int n_act = params.dims().actions;
  Matrix d_logits(n_act, n);
  Vector d_values(n);
  LossDiagnostics diag;

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = batch[static_cast<std::size_t>(i)];
    if (s.action < 0 || s.action >= n_act) throw ShapeError("action index out of range");
    const double logp = cache.log_probs(s.action, i);
    const double psi = std::exp(logp - s.old_log_prob);
    const double clipped = std::clamp(psi, 1.0 - spec.clip_epsilon, 1.0 + spec.clip_epsilon);
    const double unclipped_term = psi * s.advantage;
    const double clipped_term = clipped * s.advantage;
    const bool use_unclipped = unclipped_term <= clipped_term;
    diag.policy_objective += std::min(unclipped_term, clipped_term);
    const double g_logp = use_unclipped ? unclipped_term : 0.0;
    if (std::abs(psi - 1.0) > spec.clip_epsilon) diag.clip_fraction += 1.0;
    diag.approx_kl += (psi - 1.0) - (logp - s.old_log_prob);

    double entropy = 0.0;
    for (int k = 0; k < n_act; ++k) entropy -= cache.probs(k, i) * cache.log_probs(k, i);
    diag.entropy += entropy;

    const double diff = cache.values(i) - s.ret;
    diag.value_loss += huber(diff, spec.huber_delta);
    d_values(i) = spec.value_coeff * std::clamp(diff, -spec.huber_delta, spec.huber_delta) * inv_n;

    for (int k = 0; k < n_act; ++k) {
      const double pk = cache.probs(k, i);
      const double onehot = k == s.action ? 1.0 : 0.0;
      d_logits(k, i) =
          (-g_logp * (onehot - pk) + spec.entropy_coeff * pk * (cache.log_probs(k, i) + entropy)) * inv_n;
    }
  }

  diag.policy_objective *= inv_n;
  diag.value_loss *= inv_n;
  diag.entropy *= inv_n;
  diag.clip_fraction *= inv_n;
  diag.approx_kl *= inv_n;
  diag.loss = -diag.policy_objective + spec.value_coeff * diag.value_loss - spec.entropy_coeff * diag.entropy;
  if (!std::isfinite(diag.loss)) throw NonFiniteLoss("PPO loss is not finite");

  if (grads) backward(params, cache, d_logits, d_values, *grads);
  return diag;
}

void NetworkPolicy::evaluate(std::span<const env::Observation> obs, std::vector<std::array<double, 3>>& probs,
                             std::vector<double>& values) const {
  probs.resize(obs.size());
  values.resize(obs.size());
  if (obs.empty()) return;
  ForwardCache cache;
  forward(params_, obs, cache);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    for (int k = 0; k < 3; ++k) probs[i][static_cast<std::size_t>(k)] = cache.probs(k, col);
    values[i] = cache.values(col);
  }
}

// ---- checkpoints ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'U', 'A', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError("checkpoint truncated");
  return v;
}

nlohmann::json dims_json(const Dims& d) {
  return {{"own_in", d.own_in}, {"nbr_in", d.nbr_in}, {"hidden", d.hidden}, {"actions", d.actions}};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params, const nlohmann::json& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  nlohmann::json header = {{"dims", dims_json(params.dims())}, {"metadata", metadata}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint32_t>(out, kNumBlocks);
  for (int b = 0; b < kNumBlocks; ++b) {
    const auto blk = static_cast<Block>(b);
    const std::string name = block_name(blk);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.rows(blk)));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.cols(blk)));
    const auto m = params[blk];
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw ParseError(path.string() + " is not a checkpoint");
  if (const auto v = get<std::uint32_t>(in); v != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(v));
  const auto len = get<std::uint64_t>(in);
  if (len > (1u << 26)) throw ParseError("checkpoint header too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw ParseError("checkpoint truncated");

  Dims dims;
  nlohmann::json metadata;
  try {
    const auto header = nlohmann::json::parse(text);
    const auto& d = header.at("dims");
    dims = {d.at("own_in").get<int>(), d.at("nbr_in").get<int>(), d.at("hidden").get<int>(),
            d.at("actions").get<int>()};
    metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint header: ") + e.what());
  }
  if (dims.hidden <= 0 || dims.hidden > 65536 || dims.own_in <= 0 || dims.nbr_in <= 0 || dims.actions <= 0)
    throw ParseError("bad checkpoint dimensions");

  Checkpoint ck{ParameterSet(dims), std::move(metadata)};
  if (get<std::uint32_t>(in) != kNumBlocks) throw ParseError("unexpected checkpoint block count");
  for (int b = 0; b < kNumBlocks; ++b) {
    const auto blk = static_cast<Block>(b);
    const auto name_len = get<std::uint32_t>(in);
    if (name_len > 64) throw ParseError("bad block name");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw ParseError("checkpoint truncated");
    if (name != block_name(blk)) throw ParseError("expected block " + std::string(block_name(blk)) + ", found " + name);
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    if (static_cast<int>(rows) != ck.params.rows(blk) || static_cast<int>(cols) != ck.params.cols(blk))
      throw ParseError("shape mismatch in block " + name);
    auto m = ck.params[blk];
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
      throw ParseError("checkpoint truncated");
  }
  return ck;
}

}  // namespace uam::nn
