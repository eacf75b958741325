#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ecpipe/matrix.hpp"
#include "ecpipe/rng.hpp"

namespace ecpipe::nn {

enum class LayerKind { Linear, ReLU, LayerNorm, Residual, SigmoidHead, SoftmaxHead };

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t in = 0, out = 0;    // Linear
  std::size_t width = 0;          // LayerNorm
  std::size_t classes = 0;        // SoftmaxHead
  std::vector<LayerSpec> block;   // Residual
};

LayerSpec linear(std::size_t in, std::size_t out);
LayerSpec relu();
LayerSpec layer_norm(std::size_t width);
LayerSpec residual(std::vector<LayerSpec> block);
LayerSpec sigmoid_head();
LayerSpec softmax_head(std::size_t classes);

struct NetworkSpec {
  std::vector<LayerSpec> layers;
};

/// Check width compatibility through the stack; returns the output width.
std::size_t validate_spec(const NetworkSpec& spec, std::size_t input_dim);

/// Input width implied by the leading Linear layer.
std::size_t spec_input_dim(const NetworkSpec& spec);

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& json_text);

/// One named parameter tensor (vectors have cols == 1).
struct Tensor {
  std::string name;
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  std::size_t size() const { return v.size(); }
};

struct Parameters {
  std::vector<Tensor> tensors;

  std::size_t total_size() const;
};
using Gradients = Parameters;

/// Zero-valued parameters shaped for the spec, depth-first layer order.
Parameters zero_params(const NetworkSpec& spec);

/// Glorot-uniform weights (|w| <= sqrt(6/(fan_in+fan_out))), zero biases,
/// unit LayerNorm gains. Deterministic given the generator state.
Parameters init_params(const NetworkSpec& spec, Rng& rng);

// --- execution -----------------------------------------------------------

/// Flattened execution plan; Residual blocks become begin/end markers.
struct Plan;

struct Cache {
  std::vector<Matrix> slots;
};

struct ForwardResult {
  Matrix output;
  Cache cache;
};

struct BackwardResult {
  Gradients grads;
  Matrix dinput;
};

class Network {
 public:
  Network(NetworkSpec spec, std::size_t input_dim);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const NetworkSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }

  /// Standard composition. LayerNorm uses eps = 1e-5; rows of a SoftmaxHead
  /// output sum to 1. Throws on width mismatch or non-finite input.
  ForwardResult forward(const Parameters& params, const Matrix& batch) const;

  /// Backpropagate d(loss)/d(output). When `fused_head` is set and the spec
  /// ends in a Sigmoid/Softmax head, `doutput` is interpreted as the gradient
  /// with respect to the pre-head values (the usual fused loss gradient).
  BackwardResult backward(const Parameters& params, const Cache& cache, const Matrix& doutput,
                          bool fused_head) const;

 private:
  NetworkSpec spec_;
  std::size_t input_dim_ = 0, output_dim_ = 0;
  std::unique_ptr<Plan> plan_;
};

// --- losses --------------------------------------------------------------

struct ScalarLoss {
  double loss = 0.0;
  Matrix dlogits;
};

/// Weighted mean binary cross entropy over predictions p in (0,1) (B x 1),
/// clamped at eps = 1e-12. dlogits is the gradient with respect to the
/// pre-sigmoid logits: w_i (p_i - y_i) / sum(w). A zero weight sum yields a
/// zero loss and zero gradients.
ScalarLoss bce_loss(const Matrix& p, const std::vector<double>& y,
                    const std::vector<double>& weights);

/// Class-weighted cross entropy over logits (B x N) against target
/// distributions: mean over the batch of phi(argmax target) * CE, gradient
/// phi * (softmax - target) / B. `sample_weights` (optional, defaults to 1)
/// scales individual rows; it is used for partially labeled batches.
ScalarLoss smoothed_ce_loss(const Matrix& logits, const Matrix& targets,
                            const std::vector<double>& phi,
                            const std::vector<double>* sample_weights = nullptr);

/// (1-eps) * onehot + eps / N.
std::vector<double> label_smooth(const std::vector<double>& onehot, double eps);

/// Beta(a, b) via two Marsaglia-Tsang gamma draws over splitmix64 uniforms.
double sample_beta(double a, double b, Rng& rng);

/// lam * A + (1-lam) * B, elementwise.
Matrix lerp(const Matrix& a, const Matrix& b, double lam);

struct MixedBatch {
  Matrix x;
  Matrix t;
  double lambda = 1.0;
};

/// Mixup with lambda ~ Beta(alpha, alpha) shared by the whole batch.
MixedBatch mixup(const Matrix& xa, const Matrix& ta, const Matrix& xb, const Matrix& tb,
                 double alpha, Rng& rng);
MixedBatch mixup_fixed(const Matrix& xa, const Matrix& ta, const Matrix& xb, const Matrix& tb,
                       double lambda);

// --- optimizer -----------------------------------------------------------

struct AdamWState {
  std::vector<Tensor> m, v;
  std::uint64_t step = 0;
};

AdamWState make_adamw_state(const Parameters& params);

/// Decoupled AdamW: weight decay is applied to the parameters before the
/// bias-corrected moment update. Throws NumericError on non-finite
/// gradients, naming the offending tensor.
void adamw_step(Parameters& params, const Gradients& grads, AdamWState& state, double lr,
                double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

// --- verification --------------------------------------------------------

struct LossEval {
  double loss = 0.0;
  Gradients grads;
};
using LossFn = std::function<LossEval(const Parameters&)>;

/// Central-difference check of an analytic gradient. Relative error is
/// |a - n| / max(1e-8, |a| + |n|), maximized over up to `max_coords`
/// randomly sampled coordinates (all of them when the model is small).
double grad_check(const Parameters& params, const LossFn& fn, double h = 1e-5,
                  std::size_t max_coords = 256, Rng* rng = nullptr);

// --- checkpoints ---------------------------------------------------------

/// "SLMC" container: magic, version 0x01, u32 header byte length, UTF-8 JSON
/// header, then every parameter group's tensors as little-endian f64 in spec
/// order. Round-trips bit-exactly.
void write_checkpoint(const std::filesystem::path& path, const std::string& header_json,
                      const std::vector<const Parameters*>& groups);

struct RawCheckpoint {
  std::string header_json;
  std::vector<double> values;
};

RawCheckpoint read_checkpoint(const std::filesystem::path& path);

/// Copy values[offset...] into the tensors of `params`; returns the new
/// offset. Throws FormatError when the stream is too short.
std::size_t fill_params(Parameters& params, const std::vector<double>& values,
                        std::size_t offset);

}  // namespace ecpipe::nn
