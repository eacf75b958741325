#include "ecpipe/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ecpipe/error.hpp"

namespace ecpipe::nn {

using json = nlohmann::json;

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kBceClamp = 1e-12;

void check_finite(const Matrix& m, const char* what) {
  for (double x : m.a)
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
}

}  // namespace

LayerSpec linear(std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::Linear;
  l.in = in;
  l.out = out;
  return l;
}
LayerSpec relu() {
  LayerSpec l;
  l.kind = LayerKind::ReLU;
  return l;
}
LayerSpec layer_norm(std::size_t width) {
  LayerSpec l;
  l.kind = LayerKind::LayerNorm;
  l.width = width;
  return l;
}
LayerSpec residual(std::vector<LayerSpec> block) {
  LayerSpec l;
  l.kind = LayerKind::Residual;
  l.block = std::move(block);
  return l;
}
LayerSpec sigmoid_head() {
  LayerSpec l;
  l.kind = LayerKind::SigmoidHead;
  return l;
}
LayerSpec softmax_head(std::size_t classes) {
  LayerSpec l;
  l.kind = LayerKind::SoftmaxHead;
  l.classes = classes;
  return l;
}

namespace {

std::size_t validate_layers(const std::vector<LayerSpec>& layers, std::size_t width) {
  for (const LayerSpec& l : layers) {
    switch (l.kind) {
      case LayerKind::Linear:
        if (l.in == 0 || l.out == 0) throw DataError("linear layer with zero width");
        if (l.in != width)
          throw DataError("linear layer expects width " + std::to_string(l.in) + ", got " +
                          std::to_string(width));
        width = l.out;
        break;
      case LayerKind::ReLU:
        break;
      case LayerKind::LayerNorm:
        if (l.width != width)
          throw DataError("layernorm width " + std::to_string(l.width) + " does not match " +
                          std::to_string(width));
        break;
      case LayerKind::Residual: {
        std::size_t out = validate_layers(l.block, width);
        if (out != width)
          throw DataError("residual block output width " + std::to_string(out) +
                          " does not match its input width " + std::to_string(width));
        break;
      }
      case LayerKind::SigmoidHead:
        break;
      case LayerKind::SoftmaxHead:
        if (l.classes != width)
          throw DataError("softmax head over " + std::to_string(l.classes) +
                          " classes fed with width " + std::to_string(width));
        break;
    }
  }
  return width;
}

}  // namespace

std::size_t validate_spec(const NetworkSpec& spec, std::size_t input_dim) {
  if (spec.layers.empty()) throw DataError("empty network spec");
  return validate_layers(spec.layers, input_dim);
}

std::size_t spec_input_dim(const NetworkSpec& spec) {
  for (const LayerSpec& l : spec.layers)
    if (l.kind == LayerKind::Linear) return l.in;
  throw DataError("network spec has no linear layer; input width unknown");
}

namespace {

json layers_to_json(const std::vector<LayerSpec>& layers) {
  json arr = json::array();
  for (const LayerSpec& l : layers) {
    json e;
    switch (l.kind) {
      case LayerKind::Linear:
        e["kind"] = "linear";
        e["in"] = l.in;
        e["out"] = l.out;
        break;
      case LayerKind::ReLU:
        e["kind"] = "relu";
        break;
      case LayerKind::LayerNorm:
        e["kind"] = "layernorm";
        e["width"] = l.width;
        break;
      case LayerKind::Residual:
        e["kind"] = "residual";
        e["block"] = layers_to_json(l.block);
        break;
      case LayerKind::SigmoidHead:
        e["kind"] = "sigmoid_head";
        break;
      case LayerKind::SoftmaxHead:
        e["kind"] = "softmax_head";
        e["classes"] = l.classes;
        break;
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

std::vector<LayerSpec> layers_from_json(const json& arr) {
  if (!arr.is_array()) throw ParseError("network spec JSON must be an array of layers");
  std::vector<LayerSpec> layers;
  for (const json& e : arr) {
    if (!e.is_object() || !e.contains("kind"))
      throw ParseError("layer entry missing \"kind\"");
    std::string kind = e.at("kind").get<std::string>();
    if (kind == "linear") {
      layers.push_back(linear(e.at("in").get<std::size_t>(), e.at("out").get<std::size_t>()));
    } else if (kind == "relu") {
      layers.push_back(relu());
    } else if (kind == "layernorm") {
      layers.push_back(layer_norm(e.at("width").get<std::size_t>()));
    } else if (kind == "residual") {
      layers.push_back(residual(layers_from_json(e.at("block"))));
    } else if (kind == "sigmoid_head") {
      layers.push_back(sigmoid_head());
    } else if (kind == "softmax_head") {
      layers.push_back(softmax_head(e.at("classes").get<std::size_t>()));
    } else {
      throw ParseError("unknown layer kind '" + kind + "'");
    }
  }
  return layers;
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) { return layers_to_json(spec.layers).dump(); }

NetworkSpec spec_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid network spec JSON: ") + e.what());
  }
  NetworkSpec spec;
  spec.layers = layers_from_json(j);
  return spec;
}

std::size_t Parameters::total_size() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.size();
  return n;
}

namespace {

void collect_tensors(const std::vector<LayerSpec>& layers, const std::string& prefix,
                     std::vector<Tensor>& out) {
  std::size_t idx = 0;
  for (const LayerSpec& l : layers) {
    std::string base = prefix + std::to_string(idx++);
    switch (l.kind) {
      case LayerKind::Linear: {
        Tensor w;
        w.name = base + ".linear.W";
        w.rows = l.in;
        w.cols = l.out;
        w.v.assign(l.in * l.out, 0.0);
        out.push_back(std::move(w));
        Tensor b;
        b.name = base + ".linear.b";
        b.rows = l.out;
        b.cols = 1;
        b.v.assign(l.out, 0.0);
        out.push_back(std::move(b));
        break;
      }
      case LayerKind::LayerNorm: {
        Tensor g;
        g.name = base + ".layernorm.gain";
        g.rows = l.width;
        g.cols = 1;
        g.v.assign(l.width, 0.0);
        out.push_back(std::move(g));
        Tensor s;
        s.name = base + ".layernorm.shift";
        s.rows = l.width;
        s.cols = 1;
        s.v.assign(l.width, 0.0);
        out.push_back(std::move(s));
        break;
      }
      case LayerKind::Residual:
        collect_tensors(l.block, base + ".res.", out);
        break;
      default:
        break;
    }
  }
}

}  // namespace

Parameters zero_params(const NetworkSpec& spec) {
  Parameters p;
  collect_tensors(spec.layers, "layer", p.tensors);
  return p;
}

namespace {

void init_tensors(const std::vector<LayerSpec>& layers, std::vector<Tensor>& tensors,
                  std::size_t& cursor, Rng& rng) {
  for (const LayerSpec& l : layers) {
    switch (l.kind) {
      case LayerKind::Linear: {
        Tensor& w = tensors[cursor++];
        double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        for (double& x : w.v) x = (2.0 * rng.next_unit() - 1.0) * limit;
        ++cursor;  // bias stays zero
        break;
      }
      case LayerKind::LayerNorm: {
        Tensor& g = tensors[cursor++];
        std::fill(g.v.begin(), g.v.end(), 1.0);
        ++cursor;  // shift stays zero
        break;
      }
      case LayerKind::Residual:
        init_tensors(l.block, tensors, cursor, rng);
        break;
      default:
        break;
    }
  }
}

}  // namespace

Parameters init_params(const NetworkSpec& spec, Rng& rng) {
  Parameters p = zero_params(spec);
  std::size_t cursor = 0;
  init_tensors(spec.layers, p.tensors, cursor, rng);
  return p;
}

// --- execution plan ------------------------------------------------------

namespace {

enum class Op { Linear, ReLU, LayerNorm, SigmoidHead, SoftmaxHead, ResBegin, ResEnd };

struct Node {
  Op op;
  std::size_t in = 0, out = 0, width = 0;
  int t0 = -1, t1 = -1;  // parameter tensor indices
};

std::size_t node_cache_slots(const Node& n) {
  switch (n.op) {
    case Op::Linear: return 1;    // input
    case Op::ReLU: return 1;      // input
    case Op::LayerNorm: return 2; // xhat, invstd
    case Op::SigmoidHead: return 1;  // output
    case Op::SoftmaxHead: return 1;  // output
    default: return 0;
  }
}

}  // namespace

struct Plan {
  std::vector<Node> nodes;
  std::size_t input_dim = 0, output_dim = 0;
};

namespace {

void build_nodes(const std::vector<LayerSpec>& layers, std::vector<Node>& nodes, int& tcur) {
  for (const LayerSpec& l : layers) {
    switch (l.kind) {
      case LayerKind::Linear: {
        Node n;
        n.op = Op::Linear;
        n.in = l.in;
        n.out = l.out;
        n.t0 = tcur++;
        n.t1 = tcur++;
        nodes.push_back(n);
        break;
      }
      case LayerKind::ReLU:
        nodes.push_back({Op::ReLU});
        break;
      case LayerKind::LayerNorm: {
        Node n;
        n.op = Op::LayerNorm;
        n.width = l.width;
        n.t0 = tcur++;
        n.t1 = tcur++;
        nodes.push_back(n);
        break;
      }
      case LayerKind::Residual:
        nodes.push_back({Op::ResBegin});
        build_nodes(l.block, nodes, tcur);
        nodes.push_back({Op::ResEnd});
        break;
      case LayerKind::SigmoidHead:
        nodes.push_back({Op::SigmoidHead});
        break;
      case LayerKind::SoftmaxHead:
        nodes.push_back({Op::SoftmaxHead});
        break;
    }
  }
}

}  // namespace

Network::Network(NetworkSpec spec, std::size_t input_dim)
    : spec_(std::move(spec)), input_dim_(input_dim) {
  output_dim_ = validate_spec(spec_, input_dim);
  plan_ = std::make_unique<Plan>();
  plan_->input_dim = input_dim_;
  plan_->output_dim = output_dim_;
  int tcur = 0;
  build_nodes(spec_.layers, plan_->nodes, tcur);
}

Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

ForwardResult Network::forward(const Parameters& params, const Matrix& batch) const {
  if (batch.cols != input_dim_)
    throw DataError("batch width " + std::to_string(batch.cols) + " does not match input dim " +
                    std::to_string(input_dim_));
  check_finite(batch, "network input");

  ForwardResult result;
  Cache& cache = result.cache;
  Matrix x = batch;
  std::vector<Matrix> skips;

  for (const Node& n : plan_->nodes) {
    switch (n.op) {
      case Op::Linear: {
        const Tensor& w = params.tensors[static_cast<std::size_t>(n.t0)];
        const Tensor& b = params.tensors[static_cast<std::size_t>(n.t1)];
        Matrix y(x.rows, n.out);
        for (std::size_t r = 0; r < x.rows; ++r) {
          double* yr = y.row(r);
          for (std::size_t o = 0; o < n.out; ++o) yr[o] = b.v[o];
          const double* xr = x.row(r);
          for (std::size_t j = 0; j < n.in; ++j) {
            double xv = xr[j];
            const double* wj = w.v.data() + j * n.out;
            for (std::size_t o = 0; o < n.out; ++o) yr[o] += xv * wj[o];
          }
        }
        cache.slots.push_back(std::move(x));
        x = std::move(y);
        break;
      }
      case Op::ReLU: {
        Matrix y = x;
        for (double& v : y.a) v = v > 0.0 ? v : 0.0;
        cache.slots.push_back(std::move(x));
        x = std::move(y);
        break;
      }
      case Op::LayerNorm: {
        const Tensor& gain = params.tensors[static_cast<std::size_t>(n.t0)];
        const Tensor& shift = params.tensors[static_cast<std::size_t>(n.t1)];
        Matrix xhat(x.rows, x.cols);
        Matrix invstd(x.rows, 1);
        Matrix y(x.rows, x.cols);
        for (std::size_t r = 0; r < x.rows; ++r) {
          const double* xr = x.row(r);
          double mean = 0.0;
          for (std::size_t c = 0; c < x.cols; ++c) mean += xr[c];
          mean /= static_cast<double>(x.cols);
          double var = 0.0;
          for (std::size_t c = 0; c < x.cols; ++c) {
            double d = xr[c] - mean;
            var += d * d;
          }
          var /= static_cast<double>(x.cols);
          double inv = 1.0 / std::sqrt(var + kLayerNormEps);
          invstd.at(r, 0) = inv;
          for (std::size_t c = 0; c < x.cols; ++c) {
            double h = (xr[c] - mean) * inv;
            xhat.at(r, c) = h;
            y.at(r, c) = h * gain.v[c] + shift.v[c];
          }
        }
        cache.slots.push_back(std::move(xhat));
        cache.slots.push_back(std::move(invstd));
        x = std::move(y);
        break;
      }
      case Op::SigmoidHead: {
        Matrix y = x;
        for (double& v : y.a) v = 1.0 / (1.0 + std::exp(-v));
        cache.slots.push_back(y);
        x = std::move(y);
        break;
      }
      case Op::SoftmaxHead: {
        Matrix y(x.rows, x.cols);
        for (std::size_t r = 0; r < x.rows; ++r) {
          const double* xr = x.row(r);
          double m = xr[0];
          for (std::size_t c = 1; c < x.cols; ++c) m = std::max(m, xr[c]);
          double sum = 0.0;
          for (std::size_t c = 0; c < x.cols; ++c) {
            double e = std::exp(xr[c] - m);
            y.at(r, c) = e;
            sum += e;
          }
          for (std::size_t c = 0; c < x.cols; ++c) y.at(r, c) /= sum;
        }
        cache.slots.push_back(y);
        x = std::move(y);
        break;
      }
      case Op::ResBegin:
        skips.push_back(x);
        break;
      case Op::ResEnd: {
        Matrix skip = std::move(skips.back());
        skips.pop_back();
        for (std::size_t i = 0; i < x.a.size(); ++i) x.a[i] += skip.a[i];
        break;
      }
    }
  }
  result.output = std::move(x);
  return result;
}

BackwardResult Network::backward(const Parameters& params, const Cache& cache,
                                 const Matrix& doutput, bool fused_head) const {
  BackwardResult result;
  result.grads = zero_params(spec_);

  std::size_t node_end = plan_->nodes.size();
  std::size_t slot_cursor = cache.slots.size();
  if (fused_head && node_end > 0) {
    Op last = plan_->nodes[node_end - 1].op;
    if (last == Op::SigmoidHead || last == Op::SoftmaxHead) {
      --node_end;
      slot_cursor -= 1;
    }
  }

  Matrix d = doutput;
  std::vector<Matrix> dskips;

  for (std::size_t ni = node_end; ni-- > 0;) {
    const Node& n = plan_->nodes[ni];
    slot_cursor -= node_cache_slots(n);
    switch (n.op) {
      case Op::Linear: {
        const Matrix& x = cache.slots[slot_cursor];
        const Tensor& w = params.tensors[static_cast<std::size_t>(n.t0)];
        Tensor& dw = result.grads.tensors[static_cast<std::size_t>(n.t0)];
        Tensor& db = result.grads.tensors[static_cast<std::size_t>(n.t1)];
        Matrix dx(x.rows, n.in);
        for (std::size_t r = 0; r < x.rows; ++r) {
          const double* dr = d.row(r);
          const double* xr = x.row(r);
          for (std::size_t o = 0; o < n.out; ++o) db.v[o] += dr[o];
          for (std::size_t j = 0; j < n.in; ++j) {
            double xv = xr[j];
            const double* wj = w.v.data() + j * n.out;
            double* dwj = dw.v.data() + j * n.out;
            double acc = 0.0;
            for (std::size_t o = 0; o < n.out; ++o) {
              dwj[o] += xv * dr[o];
              acc += dr[o] * wj[o];
            }
            dx.at(r, j) = acc;
          }
        }
        d = std::move(dx);
        break;
      }
      case Op::ReLU: {
        const Matrix& x = cache.slots[slot_cursor];
        for (std::size_t i = 0; i < d.a.size(); ++i)
          if (x.a[i] <= 0.0) d.a[i] = 0.0;
        break;
      }
      case Op::LayerNorm: {
        const Matrix& xhat = cache.slots[slot_cursor];
        const Matrix& invstd = cache.slots[slot_cursor + 1];
        const Tensor& gain = params.tensors[static_cast<std::size_t>(n.t0)];
        Tensor& dgain = result.grads.tensors[static_cast<std::size_t>(n.t0)];
        Tensor& dshift = result.grads.tensors[static_cast<std::size_t>(n.t1)];
        Matrix dx(d.rows, d.cols);
        const auto width = static_cast<double>(d.cols);
        for (std::size_t r = 0; r < d.rows; ++r) {
          const double* dr = d.row(r);
          const double* hr = xhat.row(r);
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t c = 0; c < d.cols; ++c) {
            dgain.v[c] += dr[c] * hr[c];
            dshift.v[c] += dr[c];
            double dh = dr[c] * gain.v[c];
            mean_dh += dh;
            mean_dh_h += dh * hr[c];
          }
          mean_dh /= width;
          mean_dh_h /= width;
          double inv = invstd.at(r, 0);
          for (std::size_t c = 0; c < d.cols; ++c) {
            double dh = dr[c] * gain.v[c];
            dx.at(r, c) = inv * (dh - mean_dh - hr[c] * mean_dh_h);
          }
        }
        d = std::move(dx);
        break;
      }
      case Op::SigmoidHead: {
        const Matrix& p = cache.slots[slot_cursor];
        for (std::size_t i = 0; i < d.a.size(); ++i) d.a[i] *= p.a[i] * (1.0 - p.a[i]);
        break;
      }
      case Op::SoftmaxHead: {
        const Matrix& p = cache.slots[slot_cursor];
        Matrix dx(d.rows, d.cols);
        for (std::size_t r = 0; r < d.rows; ++r) {
          const double* dr = d.row(r);
          const double* pr = p.row(r);
          double dot = 0.0;
          for (std::size_t c = 0; c < d.cols; ++c) dot += dr[c] * pr[c];
          for (std::size_t c = 0; c < d.cols; ++c) dx.at(r, c) = pr[c] * (dr[c] - dot);
        }
        d = std::move(dx);
        break;
      }
      case Op::ResEnd:
        dskips.push_back(d);
        break;
      case Op::ResBegin: {
        Matrix saved = std::move(dskips.back());
        dskips.pop_back();
        for (std::size_t i = 0; i < d.a.size(); ++i) d.a[i] += saved.a[i];
        break;
      }
    }
  }
  result.dinput = std::move(d);
  return result;
}

// --- losses --------------------------------------------------------------

ScalarLoss bce_loss(const Matrix& p, const std::vector<double>& y,
                    const std::vector<double>& weights) {
  if (p.cols != 1) throw DataError("bce_loss expects a B x 1 prediction matrix");
  if (y.size() != p.rows || weights.size() != p.rows)
    throw DataError("bce_loss size mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw DataError("bce_loss weights must be non-negative");
    wsum += w;
  }
  ScalarLoss out;
  out.dlogits = Matrix(p.rows, 1);
  if (wsum == 0.0) return out;

  double loss = 0.0;
  for (std::size_t i = 0; i < p.rows; ++i) {
    double pi = p.at(i, 0);
    if (!(pi >= 0.0 && pi <= 1.0))
      throw NumericError("bce_loss prediction outside [0, 1]: " + std::to_string(pi));
    pi = std::clamp(pi, kBceClamp, 1.0 - kBceClamp);
    loss += weights[i] * -(y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi));
    out.dlogits.at(i, 0) = weights[i] * (p.at(i, 0) - y[i]) / wsum;
  }
  out.loss = loss / wsum;
  return out;
}

ScalarLoss smoothed_ce_loss(const Matrix& logits, const Matrix& targets,
                            const std::vector<double>& phi,
                            const std::vector<double>* sample_weights) {
  if (logits.rows != targets.rows || logits.cols != targets.cols)
    throw DataError("smoothed_ce_loss logit/target shape mismatch");
  if (phi.size() != logits.cols) throw DataError("phi length does not match class count");
  for (double w : phi)
    if (w < 0.0) throw DataError("class weights must be non-negative");
  if (sample_weights && sample_weights->size() != logits.rows)
    throw DataError("sample weight count does not match batch size");

  const std::size_t batch = logits.rows;
  const std::size_t classes = logits.cols;
  ScalarLoss out;
  out.dlogits = Matrix(batch, classes);
  if (batch == 0) return out;

  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const double* t = targets.row(r);
    double tsum = 0.0;
    std::size_t argmax = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (t[c] < 0.0) throw DataError("target rows must be distributions (negative entry)");
      tsum += t[c];
      if (t[c] > t[argmax]) argmax = c;
    }
    if (std::abs(tsum - 1.0) > 1e-9)
      throw DataError("target row " + std::to_string(r) + " does not sum to 1");

    const double* x = logits.row(r);
    double m = x[0];
    for (std::size_t c = 1; c < classes; ++c) m = std::max(m, x[c]);
    double sumexp = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sumexp += std::exp(x[c] - m);
    double logz = m + std::log(sumexp);

    double sw = sample_weights ? (*sample_weights)[r] : 1.0;
    double coeff = sw * phi[argmax];
    double ce = 0.0;
    for (std::size_t c = 0; c < classes; ++c)
      if (t[c] > 0.0) ce -= t[c] * (x[c] - logz);
    total += coeff * ce;

    double* g = out.dlogits.row(r);
    double scale = coeff / static_cast<double>(batch);
    for (std::size_t c = 0; c < classes; ++c) {
      double softmax = std::exp(x[c] - logz);
      g[c] = scale * (softmax - t[c]);
    }
  }
  out.loss = total / static_cast<double>(batch);
  return out;
}

std::vector<double> label_smooth(const std::vector<double>& onehot, double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw DataError("label smoothing must lie in [0, 1)");
  const double n = static_cast<double>(onehot.size());
  std::vector<double> out(onehot.size());
  for (std::size_t i = 0; i < onehot.size(); ++i)
    out[i] = (1.0 - eps) * onehot[i] + eps / n;
  return out;
}

namespace {

double sample_normal(Rng& rng) {
  double u1 = rng.next_unit();
  double u2 = rng.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Marsaglia-Tsang gamma for shape >= 1; shapes below 1 go through the
// Gamma(a+1) * U^(1/a) boost.
double sample_gamma(double shape, Rng& rng) {
  if (shape < 1.0) {
    double g = sample_gamma(shape + 1.0, rng);
    double u = rng.next_unit();
    return g * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = sample_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = rng.next_unit();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace

double sample_beta(double a, double b, Rng& rng) {
  double ga = sample_gamma(a, rng);
  double gb = sample_gamma(b, rng);
  double sum = ga + gb;
  if (sum <= 0.0) return 0.5;
  return std::clamp(ga / sum, 0.0, 1.0);
}

Matrix lerp(const Matrix& a, const Matrix& b, double lam) {
  if (a.rows != b.rows || a.cols != b.cols) throw DataError("lerp shape mismatch");
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.a.size(); ++i) out.a[i] = lam * a.a[i] + (1.0 - lam) * b.a[i];
  return out;
}

MixedBatch mixup_fixed(const Matrix& xa, const Matrix& ta, const Matrix& xb, const Matrix& tb,
                       double lambda) {
  MixedBatch out;
  out.lambda = lambda;
  out.x = lerp(xa, xb, lambda);
  out.t = lerp(ta, tb, lambda);
  return out;
}

MixedBatch mixup(const Matrix& xa, const Matrix& ta, const Matrix& xb, const Matrix& tb,
                 double alpha, Rng& rng) {
  return mixup_fixed(xa, ta, xb, tb, sample_beta(alpha, alpha, rng));
}

// --- optimizer -----------------------------------------------------------

AdamWState make_adamw_state(const Parameters& params) {
  AdamWState s;
  s.m = params.tensors;
  s.v = params.tensors;
  for (Tensor& t : s.m) std::fill(t.v.begin(), t.v.end(), 0.0);
  for (Tensor& t : s.v) std::fill(t.v.begin(), t.v.end(), 0.0);
  return s;
}

void adamw_step(Parameters& params, const Gradients& grads, AdamWState& state, double lr,
                double weight_decay, double beta1, double beta2, double eps) {
  if (grads.tensors.size() != params.tensors.size())
    throw DataError("gradient/parameter tensor count mismatch");
  for (std::size_t ti = 0; ti < params.tensors.size(); ++ti)
    for (double g : grads.tensors[ti].v)
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in " + params.tensors[ti].name);

  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
    Tensor& p = params.tensors[ti];
    const Tensor& g = grads.tensors[ti];
    Tensor& m = state.m[ti];
    Tensor& v = state.v[ti];
    for (std::size_t i = 0; i < p.v.size(); ++i) {
      p.v[i] -= lr * weight_decay * p.v[i];
      m.v[i] = beta1 * m.v[i] + (1.0 - beta1) * g.v[i];
      v.v[i] = beta2 * v.v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
      double mhat = m.v[i] / bc1;
      double vhat = v.v[i] / bc2;
      p.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// --- verification --------------------------------------------------------

double grad_check(const Parameters& params, const LossFn& fn, double h, std::size_t max_coords,
                  Rng* rng) {
  LossEval base = fn(params);
  const std::size_t total = params.total_size();

  std::vector<std::pair<std::size_t, std::size_t>> coords;  // (tensor, element)
  if (total <= max_coords || rng == nullptr) {
    for (std::size_t ti = 0; ti < params.tensors.size(); ++ti)
      for (std::size_t i = 0; i < params.tensors[ti].v.size(); ++i) coords.emplace_back(ti, i);
  } else {
    for (std::size_t k = 0; k < max_coords; ++k) {
      auto flat = static_cast<std::size_t>(rng->next_below(total));
      std::size_t ti = 0;
      while (flat >= params.tensors[ti].v.size()) {
        flat -= params.tensors[ti].v.size();
        ++ti;
      }
      coords.emplace_back(ti, flat);
    }
  }

  Parameters probe = params;
  double max_rel = 0.0;
  for (auto [ti, i] : coords) {
    const double saved = probe.tensors[ti].v[i];
    probe.tensors[ti].v[i] = saved + h;
    double lp = fn(probe).loss;
    probe.tensors[ti].v[i] = saved - h;
    double lm = fn(probe).loss;
    probe.tensors[ti].v[i] = saved;

    double numeric = (lp - lm) / (2.0 * h);
    double analytic = base.grads.tensors[ti].v[i];
    double rel = std::abs(analytic - numeric) /
                 std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

// --- checkpoints ---------------------------------------------------------

namespace {
constexpr char kCkptMagic[4] = {'S', 'L', 'M', 'C'};
constexpr std::uint8_t kCkptVersion = 0x01;
}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::string& header_json,
                      const std::vector<const Parameters*>& groups) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f.write(kCkptMagic, 4);
  f.put(static_cast<char>(kCkptVersion));
  auto hlen = static_cast<std::uint32_t>(header_json.size());
  char lenbuf[4];
  std::memcpy(lenbuf, &hlen, 4);
  f.write(lenbuf, 4);
  f.write(header_json.data(), static_cast<std::streamsize>(header_json.size()));
  for (const Parameters* g : groups)
    for (const Tensor& t : g->tensors)
      f.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  if (!f) throw DataError("write failed for '" + path.string() + "'");
}

RawCheckpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw FormatError("bad magic in '" + path.string() + "': not a SLMC checkpoint");
  int version = f.get();
  if (version != kCkptVersion)
    throw FormatError("unsupported SLMC version " + std::to_string(version));
  char lenbuf[4];
  f.read(lenbuf, 4);
  if (!f) throw FormatError("truncated SLMC header length");
  std::uint32_t hlen = 0;
  std::memcpy(&hlen, lenbuf, 4);
  RawCheckpoint ckpt;
  ckpt.header_json.resize(hlen);
  f.read(ckpt.header_json.data(), hlen);
  if (!f) throw FormatError("truncated SLMC header");

  std::vector<char> rest((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (rest.size() % sizeof(double) != 0)
    throw FormatError("checkpoint payload is not a whole number of doubles");
  ckpt.values.resize(rest.size() / sizeof(double));
  std::memcpy(ckpt.values.data(), rest.data(), rest.size());
  return ckpt;
}

std::size_t fill_params(Parameters& params, const std::vector<double>& values,
                        std::size_t offset) {
  for (Tensor& t : params.tensors) {
    if (offset + t.v.size() > values.size())
      throw FormatError("checkpoint payload truncated at tensor " + t.name);
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(offset),
              values.begin() + static_cast<std::ptrdiff_t>(offset + t.v.size()), t.v.begin());
    offset += t.v.size();
  }
  return offset;
}

}  // namespace ecpipe::nn
