#pragma once

// Attention actor-critic: ownship and neighbor encoders, bilinear attention
// over neighbors, a shared trunk, and policy/value heads. Forward and reverse
// passes run over ragged batches (each sample has its own neighbor count).

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "uam/env.hpp"

namespace uam::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

struct Dims {
  int own_in = env::kOwnshipFeatures;
  int nbr_in = env::kNeighborFeatures;
  int hidden = 256;
  int actions = sim::kNumActions;
  friend bool operator==(const Dims&, const Dims&) = default;
};

enum class Block : int {
  OwnW, OwnB, NbrW, NbrB, AttW1, CtxW2, TrunkW, TrunkB, PiW, PiB, ValueW, ValueB,
};
inline constexpr int kNumBlocks = 12;

const char* block_name(Block b);

/// All weights in one contiguous buffer; each block is a column-major view.
/// The same type holds gradients and optimizer moments.
class ParameterSet {
 public:
  ParameterSet() : ParameterSet(Dims{}) {}
  explicit ParameterSet(const Dims& dims);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  int rows(Block b) const { return shape(b).first; }
  int cols(Block b) const { return shape(b).second; }
  std::pair<int, int> shape(Block b) const { return shapes_[static_cast<int>(b)]; }
  std::size_t offset(Block b) const { return offsets_[static_cast<int>(b)]; }

  MatrixMap operator[](Block b);
  ConstMatrixMap operator[](Block b) const;

  void set_zero();
  bool all_finite() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  Dims dims_;
  std::array<std::pair<int, int>, kNumBlocks> shapes_{};
  std::array<std::size_t, kNumBlocks> offsets_{};
  // A fixed base alignment makes Eigen's vectorized reductions sum in the same
  // order on every allocation, so results are bitwise reproducible.
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

/// He-scaled normal weights, zero biases, and a policy head scaled down so the
/// initial policy is close to uniform. Throws ConfigError when the input widths
/// differ from the observation encoding or a width is not positive.
ParameterSet init_params(std::uint64_t seed, const Dims& dims = {});

/// Intermediate activations kept for the reverse pass.
struct ForwardCache {
  std::vector<std::size_t> nbr_offset;  // n+1 prefix sums into the neighbor columns
  Matrix xo, xn;       // inputs: own_in x n, nbr_in x m
  Matrix s, hn;        // encoder outputs: hidden x n, hidden x m
  Matrix q;            // W1^T s
  Vector alpha;        // attention weights, length m
  Matrix c, hs;        // context and its tanh projection
  Matrix z;            // [s; hs]
  Matrix t;            // trunk output
  Matrix logits;       // actions x n
  Matrix log_probs;    // actions x n
  Matrix probs;        // actions x n
  Vector values;       // n
};

/// Throws ShapeError when an observation has the wrong widths.
void forward(const ParameterSet& params, std::span<const env::Observation> batch, ForwardCache& cache);

struct Output {
  std::array<double, 3> probs{};
  double value = 0.0;
};

Output forward(const ParameterSet& params, const env::Observation& obs);

/// Accumulates parameter gradients given loss gradients with respect to the
/// logits (actions x n) and the values (n).
void backward(const ParameterSet& params, const ForwardCache& cache, const Matrix& d_logits, const Vector& d_values,
              ParameterSet& grads);

// ---- PPO objective --------------------------------------------------------

struct LossSpec {
  double clip_epsilon = 0.4;
  double value_coeff = 0.01;
  double entropy_coeff = 0.01;
  double huber_delta = 1.0;
};

struct Sample {
  env::Observation obs;
  int action = 0;
  double advantage = 0.0;
  double ret = 0.0;
  double old_log_prob = 0.0;
};

struct LossDiagnostics {
  double loss = 0.0;
  double policy_objective = 0.0;  // mean clipped surrogate
  double value_loss = 0.0;        // mean Huber
  double entropy = 0.0;           // mean
  double clip_fraction = 0.0;
  double approx_kl = 0.0;         // mean of (r - 1) - log r
};

/// min(psi * A, clip(psi, 1 - eps, 1 + eps) * A).
double clipped_surrogate(double psi, double advantage, double epsilon);

double huber(double x, double delta);

/// Loss L = -surrogate + c_v * Huber - c_h * entropy, averaged over the batch,
/// and its exact gradient. Where the clipped branch is selected the surrogate
/// contributes no gradient. Throws NonFiniteLoss.
LossDiagnostics ppo_loss(const ParameterSet& params, std::span<const Sample> batch, const LossSpec& spec,
                         ParameterSet* grads);

// ---- inference -------------------------------------------------------------

class NetworkPolicy final : public env::Policy {
 public:
  explicit NetworkPolicy(ParameterSet params) : params_(std::move(params)) {}
  void evaluate(std::span<const env::Observation> obs, std::vector<std::array<double, 3>>& probs,
                std::vector<double>& values) const override;
  const ParameterSet& params() const { return params_; }

 private:
  ParameterSet params_;
};

// ---- checkpoints ----------------------------------------------------------

struct Checkpoint {
  ParameterSet params;
  nlohmann::json metadata = nlohmann::json::object();  // free-form; dims are stored separately
};

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const nlohmann::json& metadata = nlohmann::json::object());

/// Throws ParseError on a malformed or unsupported file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace uam::nn
