#include "cmls/nn/autograd.hpp"

#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace cmls::nn {

namespace {

thread_local bool g_grad_enabled = true;

bool any_requires_grad(const std::vector<std::shared_ptr<Node>>& inputs)
{
    return std::any_of(inputs.begin(), inputs.end(), [](const auto& n) { return n && n->requires_grad; });
}

Var record(Tensor value, std::vector<std::shared_ptr<Node>> inputs, std::function<void(Node&)> fn,
           const char* label)
{
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->label = label;
    if (g_grad_enabled && any_requires_grad(inputs)) {
        node->requires_grad = true;
        node->inputs = std::move(inputs);
        node->backward = std::move(fn);
    }
    return Var::from_node(std::move(node));
}

void add_into(Tensor& dst, std::span<const double> src)
{
    double* d = dst.data();
    for (std::size_t i = 0; i < src.size(); ++i) d[i] += src[i];
}

void require(bool ok, const std::string& what)
{
    if (!ok) throw std::invalid_argument(what);
}

} // namespace

Tensor& Node::ensure_grad()
{
    if (grad.shape() != value.shape()) grad = Tensor::zeros_like(value);
    return grad;
}

Var::Var(Tensor value, bool requires_grad, std::string label) : node_(std::make_shared<Node>())
{
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->label = std::move(label);
}

Var Var::from_node(std::shared_ptr<Node> node)
{
    Var v;
    v.node_ = std::move(node);
    return v;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Var& loss)
{
    if (!loss.defined() || loss.value().size() != 1)
        throw std::invalid_argument("backward: loss must be a single-element tensor");
    if (!loss.requires_grad())
        throw std::logic_error("backward: no recorded forward computation reaches '" + loss.label() + "'");

    // Post-order DFS gives inputs before consumers.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        }
        else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order)
        if (n->backward) n->ensure_grad().fill(0.0);
    loss.node()->ensure_grad()[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward) (*it)->backward(**it);
}

// ---- dense ----------------------------------------------------------------

Var dense(const Var& x, const Var& weight, const Var& bias)
{
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    require(ws.size() == 2 && bias.shape() == Shape{ws[0]}, "dense: weight/bias shapes " + shape_str(ws) +
                                                                " / " + shape_str(bias.shape()) + " disagree");
    require(xs.size() == 2 && xs[1] == ws[1],
            "dense: input " + shape_str(xs) + " incompatible with weight " + shape_str(ws));
    const std::size_t M = xs[0], K = ws[1], N = ws[0];

    std::vector<double> wt(K * N);
    kernels::transpose(N, K, weight.value().data(), wt.data());
    Tensor out({M, N});
    for (std::size_t i = 0; i < M; ++i) std::copy_n(bias.value().data(), N, out.data() + i * N);
    kernels::gemm_nn_acc(M, K, N, x.value().data(), wt.data(), out.data());

    return record(std::move(out), {x.node(), weight.node(), bias.node()},
                  [M, K, N](Node& self) {
                      const double* dy = self.grad.data();
                      Node& xn = *self.inputs[0];
                      Node& wn = *self.inputs[1];
                      Node& bn = *self.inputs[2];
                      if (xn.requires_grad)
                          kernels::gemm_nn_acc(M, N, K, dy, wn.value.data(), xn.ensure_grad().data());
                      if (wn.requires_grad)
                          kernels::gemm_tn_acc(M, N, K, dy, xn.value.data(), wn.ensure_grad().data());
                      if (bn.requires_grad) {
                          double* db = bn.ensure_grad().data();
                          for (std::size_t i = 0; i < M; ++i)
                              for (std::size_t j = 0; j < N; ++j) db[j] += dy[i * N + j];
                      }
                  },
                  "dense");
}

// ---- convolution ----------------------------------------------------------

ConvGeometry same_padding_geometry(const std::vector<std::size_t>& wide, std::size_t kernel, std::size_t stride)
{
    require(!wide.empty() && wide.size() <= 3, "conv: 1 to 3 spatial axes supported");
    require(kernel >= 1 && stride >= 1, "conv: kernel and stride must be >= 1");
    ConvGeometry g;
    for (std::size_t a = 0; a < wide.size(); ++a) {
        g.wide[a] = wide[a];
        g.kernel[a] = kernel;
        g.stride[a] = stride;
        g.narrow[a] = (wide[a] + stride - 1) / stride;
        const long total = static_cast<long>((g.narrow[a] - 1) * stride + kernel) - static_cast<long>(wide[a]);
        g.pad_lo[a] = static_cast<std::size_t>(std::max(total, 0L) / 2);
    }
    return g;
}

namespace {

// cols[b*P + p, c*K + k] = x[b, c, p*s + k - pad]
void im2col(const ConvGeometry& g, std::size_t B, std::size_t C, const double* x, double* cols)
{
    const std::size_t P = g.narrow_size(), K = g.kernel_size(), W = g.wide_size();
    const std::size_t row_len = C * K;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p0 = 0; p0 < g.narrow[0]; ++p0)
            for (std::size_t p1 = 0; p1 < g.narrow[1]; ++p1)
                for (std::size_t p2 = 0; p2 < g.narrow[2]; ++p2) {
                    const std::size_t p = (p0 * g.narrow[1] + p1) * g.narrow[2] + p2;
                    double* row = cols + (b * P + p) * row_len;
                    for (std::size_t k0 = 0; k0 < g.kernel[0]; ++k0) {
                        const long w0 = long(p0 * g.stride[0] + k0) - long(g.pad_lo[0]);
                        for (std::size_t k1 = 0; k1 < g.kernel[1]; ++k1) {
                            const long w1 = long(p1 * g.stride[1] + k1) - long(g.pad_lo[1]);
                            for (std::size_t k2 = 0; k2 < g.kernel[2]; ++k2) {
                                const long w2 = long(p2 * g.stride[2] + k2) - long(g.pad_lo[2]);
                                const std::size_t k = (k0 * g.kernel[1] + k1) * g.kernel[2] + k2;
                                const bool inside = w0 >= 0 && w0 < long(g.wide[0]) && w1 >= 0 &&
                                                    w1 < long(g.wide[1]) && w2 >= 0 && w2 < long(g.wide[2]);
                                const std::size_t w = inside ? (std::size_t(w0) * g.wide[1] + std::size_t(w1)) *
                                                                       g.wide[2] +
                                                                   std::size_t(w2)
                                                             : 0;
                                for (std::size_t c = 0; c < C; ++c)
                                    row[c * K + k] = inside ? x[(b * C + c) * W + w] : 0.0;
                            }
                        }
                    }
                }
}

// Adjoint of im2col: x[b, c, p*s + k - pad] += cols[b*P + p, c*K + k]
void col2im(const ConvGeometry& g, std::size_t B, std::size_t C, const double* cols, double* x)
{
    const std::size_t P = g.narrow_size(), K = g.kernel_size(), W = g.wide_size();
    const std::size_t row_len = C * K;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p0 = 0; p0 < g.narrow[0]; ++p0)
            for (std::size_t p1 = 0; p1 < g.narrow[1]; ++p1)
                for (std::size_t p2 = 0; p2 < g.narrow[2]; ++p2) {
                    const std::size_t p = (p0 * g.narrow[1] + p1) * g.narrow[2] + p2;
                    const double* row = cols + (b * P + p) * row_len;
                    for (std::size_t k0 = 0; k0 < g.kernel[0]; ++k0) {
                        const long w0 = long(p0 * g.stride[0] + k0) - long(g.pad_lo[0]);
                        if (w0 < 0 || w0 >= long(g.wide[0])) continue;
                        for (std::size_t k1 = 0; k1 < g.kernel[1]; ++k1) {
                            const long w1 = long(p1 * g.stride[1] + k1) - long(g.pad_lo[1]);
                            if (w1 < 0 || w1 >= long(g.wide[1])) continue;
                            for (std::size_t k2 = 0; k2 < g.kernel[2]; ++k2) {
                                const long w2 = long(p2 * g.stride[2] + k2) - long(g.pad_lo[2]);
                                if (w2 < 0 || w2 >= long(g.wide[2])) continue;
                                const std::size_t k = (k0 * g.kernel[1] + k1) * g.kernel[2] + k2;
                                const std::size_t w =
                                    (std::size_t(w0) * g.wide[1] + std::size_t(w1)) * g.wide[2] + std::size_t(w2);
                                for (std::size_t c = 0; c < C; ++c) x[(b * C + c) * W + w] += row[c * K + k];
                            }
                        }
                    }
                }
}

// [B, C, P] <-> [B*P, C]
void channels_to_rows(std::size_t B, std::size_t C, std::size_t P, const double* in, double* rows)
{
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t p = 0; p < P; ++p) rows[(b * P + p) * C + c] = in[(b * C + c) * P + p];
}

void rows_to_channels_acc(std::size_t B, std::size_t C, std::size_t P, const double* rows, double* out)
{
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t p = 0; p < P; ++p) out[(b * C + c) * P + p] += rows[(b * P + p) * C + c];
}

Shape spatial_shape(std::size_t B, std::size_t C, const std::array<std::size_t, 3>& ext, std::size_t rank)
{
    Shape s{B, C};
    for (std::size_t a = 0; a < rank; ++a) s.push_back(ext[a]);
    return s;
}

void check_spatial(const Shape& xs, const std::array<std::size_t, 3>& ext, const char* op)
{
    require(xs.size() >= 3 && xs.size() <= 5, std::string(op) + ": input " + shape_str(xs) +
                                                   " must be [batch, channels, 1..3 spatial extents]");
    for (std::size_t a = 0; a < 3; ++a) {
        const std::size_t have = a + 2 < xs.size() ? xs[a + 2] : 1;
        require(have == ext[a], std::string(op) + ": input " + shape_str(xs) + " does not match geometry");
    }
}

} // namespace

Var conv(const Var& x, const Var& weight, const Var& bias, const ConvGeometry& g)
{
    const auto& xs = x.shape();
    check_spatial(xs, g.wide, "conv");
    const std::size_t rank = xs.size() - 2;
    const std::size_t B = xs[0], Cin = xs[1], K = g.kernel_size(), P = g.narrow_size();
    const auto& ws = weight.shape();
    require(ws.size() == 2 && ws[1] == Cin * K && bias.shape() == Shape{ws[0]},
            "conv: weight " + shape_str(ws) + " incompatible with input " + shape_str(xs));
    const std::size_t Cout = ws[0];

    std::vector<double> cols(B * P * Cin * K);
    im2col(g, B, Cin, x.value().data(), cols.data());
    std::vector<double> wt(Cin * K * Cout);
    kernels::transpose(Cout, Cin * K, weight.value().data(), wt.data());
    std::vector<double> rows(B * P * Cout);
    for (std::size_t r = 0; r < B * P; ++r) std::copy_n(bias.value().data(), Cout, rows.data() + r * Cout);
    kernels::gemm_nn_acc(B * P, Cin * K, Cout, cols.data(), wt.data(), rows.data());

    Tensor out(spatial_shape(B, Cout, g.narrow, rank));
    rows_to_channels_acc(B, Cout, P, rows.data(), out.data());

    return record(std::move(out), {x.node(), weight.node(), bias.node()},
                  [g, B, Cin, Cout, K, P, cols = std::move(cols)](Node& self) {
                      Node& xn = *self.inputs[0];
                      Node& wn = *self.inputs[1];
                      Node& bn = *self.inputs[2];
                      std::vector<double> drows(B * P * Cout);
                      channels_to_rows(B, Cout, P, self.grad.data(), drows.data());
                      if (xn.requires_grad) {
                          std::vector<double> dcols(B * P * Cin * K, 0.0);
                          kernels::gemm_nn_acc(B * P, Cout, Cin * K, drows.data(), wn.value.data(), dcols.data());
                          col2im(g, B, Cin, dcols.data(), xn.ensure_grad().data());
                      }
                      if (wn.requires_grad)
                          kernels::gemm_tn_acc(B * P, Cout, Cin * K, drows.data(), cols.data(),
                                               wn.ensure_grad().data());
                      if (bn.requires_grad) {
                          double* db = bn.ensure_grad().data();
                          for (std::size_t r = 0; r < B * P; ++r)
                              for (std::size_t c = 0; c < Cout; ++c) db[c] += drows[r * Cout + c];
                      }
                  },
                  "conv");
}

Var conv_transpose(const Var& x, const Var& weight, const Var& bias, const ConvGeometry& g)
{
    const auto& xs = x.shape();
    check_spatial(xs, g.narrow, "conv_transpose");
    const std::size_t rank = xs.size() - 2;
    const std::size_t B = xs[0], Cin = xs[1], K = g.kernel_size(), P = g.narrow_size(), W = g.wide_size();
    const auto& ws = weight.shape();
    require(ws.size() == 2 && ws[0] == Cin && ws[1] % K == 0 && bias.shape() == Shape{ws[1] / K},
            "conv_transpose: weight " + shape_str(ws) + " incompatible with input " + shape_str(xs));
    const std::size_t Cout = ws[1] / K;

    std::vector<double> xrows(B * P * Cin);
    channels_to_rows(B, Cin, P, x.value().data(), xrows.data());
    std::vector<double> cols(B * P * Cout * K, 0.0);
    kernels::gemm_nn_acc(B * P, Cin, Cout * K, xrows.data(), weight.value().data(), cols.data());

    Tensor out(spatial_shape(B, Cout, g.wide, rank));
    col2im(g, B, Cout, cols.data(), out.data());
    double* o = out.data();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < Cout; ++c)
            for (std::size_t w = 0; w < W; ++w) o[(b * Cout + c) * W + w] += bias.value()[c];

    return record(std::move(out), {x.node(), weight.node(), bias.node()},
                  [g, B, Cin, Cout, K, P, W, xrows = std::move(xrows)](Node& self) {
                      Node& xn = *self.inputs[0];
                      Node& wn = *self.inputs[1];
                      Node& bn = *self.inputs[2];
                      std::vector<double> dcols(B * P * Cout * K);
                      im2col(g, B, Cout, self.grad.data(), dcols.data());
                      if (xn.requires_grad) {
                          std::vector<double> wt(Cout * K * Cin);
                          kernels::transpose(Cin, Cout * K, wn.value.data(), wt.data());
                          std::vector<double> dxrows(B * P * Cin, 0.0);
                          kernels::gemm_nn_acc(B * P, Cout * K, Cin, dcols.data(), wt.data(), dxrows.data());
                          rows_to_channels_acc(B, Cin, P, dxrows.data(), xn.ensure_grad().data());
                      }
                      if (wn.requires_grad)
                          kernels::gemm_tn_acc(B * P, Cin, Cout * K, xrows.data(), dcols.data(),
                                               wn.ensure_grad().data());
                      if (bn.requires_grad) {
                          double* db = bn.ensure_grad().data();
                          const double* dy = self.grad.data();
                          for (std::size_t b = 0; b < B; ++b)
                              for (std::size_t c = 0; c < Cout; ++c)
                                  for (std::size_t w = 0; w < W; ++w) db[c] += dy[(b * Cout + c) * W + w];
                      }
                  },
                  "conv_transpose");
}

// ---- elementwise ----------------------------------------------------------

Var tanh(const Var& x)
{
    Tensor out(x.shape());
    const double* in = x.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(in[i]);
    return record(std::move(out), {x.node()},
                  [](Node& self) {
                      Node& xn = *self.inputs[0];
                      double* dx = xn.ensure_grad().data();
                      for (std::size_t i = 0; i < self.value.size(); ++i) {
                          const double y = self.value[i];
                          dx[i] += self.grad[i] * (1.0 - y * y);
                      }
                  },
                  "tanh");
}

Var relu(const Var& x)
{
    Tensor out(x.shape());
    const double* in = x.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
    return record(std::move(out), {x.node()},
                  [](Node& self) {
                      Node& xn = *self.inputs[0];
                      double* dx = xn.ensure_grad().data();
                      for (std::size_t i = 0; i < self.value.size(); ++i)
                          if (xn.value[i] > 0.0) dx[i] += self.grad[i];
                  },
                  "relu");
}

Var reshape(const Var& x, Shape shape)
{
    Tensor out = x.value().reshaped(std::move(shape));
    return record(std::move(out), {x.node()},
                  [](Node& self) { add_into(self.inputs[0]->ensure_grad(), self.grad.values()); }, "reshape");
}

Var add(const Var& a, const Var& b)
{
    require(a.shape() == b.shape(), "add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    return record(std::move(out), {a.node(), b.node()},
                  [](Node& self) {
                      for (auto& in : self.inputs)
                          if (in->requires_grad) add_into(in->ensure_grad(), self.grad.values());
                  },
                  "add");
}

Var mul(const Var& a, const Var& b)
{
    require(a.shape() == b.shape(), "mul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    return record(std::move(out), {a.node(), b.node()},
                  [](Node& self) {
                      Node& x = *self.inputs[0];
                      Node& y = *self.inputs[1];
                      if (x.requires_grad) {
                          double* d = x.ensure_grad().data();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * y.value[i];
                      }
                      if (y.requires_grad) {
                          double* d = y.ensure_grad().data();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * x.value[i];
                      }
                  },
                  "mul");
}

Var sub(const Var& a, const Var& b)
{
    require(a.shape() == b.shape(), "sub: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    return record(std::move(out), {a.node(), b.node()},
                  [](Node& self) {
                      if (self.inputs[0]->requires_grad) add_into(self.inputs[0]->ensure_grad(), self.grad.values());
                      if (self.inputs[1]->requires_grad) {
                          double* d = self.inputs[1]->ensure_grad().data();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] -= self.grad[i];
                      }
                  },
                  "sub");
}

Var scale(const Var& x, double factor)
{
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * factor;
    return record(std::move(out), {x.node()},
                  [factor](Node& self) {
                      double* d = self.inputs[0]->ensure_grad().data();
                      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += factor * self.grad[i];
                  },
                  "scale");
}

Var sum(const Var& x)
{
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    return record(Tensor({1}, {s}), {x.node()},
                  [](Node& self) {
                      Tensor& d = self.inputs[0]->ensure_grad();
                      const double g = self.grad[0];
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g;
                  },
                  "sum");
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var mse(const Var& pred, const Var& target)
{
    require(pred.shape() == target.shape(),
            "mse: shapes " + shape_str(pred.shape()) + " and " + shape_str(target.shape()));
    const std::size_t n = pred.value().size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.value()[i] - target.value()[i];
        s += d * d;
    }
    return record(Tensor({1}, {s / static_cast<double>(n)}), {pred.node(), target.node()},
                  [n](Node& self) {
                      const Tensor& p = self.inputs[0]->value;
                      const Tensor& t = self.inputs[1]->value;
                      const double g = 2.0 * self.grad[0] / static_cast<double>(n);
                      if (self.inputs[0]->requires_grad) {
                          double* d = self.inputs[0]->ensure_grad().data();
                          for (std::size_t i = 0; i < n; ++i) d[i] += g * (p[i] - t[i]);
                      }
                      if (self.inputs[1]->requires_grad) {
                          double* d = self.inputs[1]->ensure_grad().data();
                          for (std::size_t i = 0; i < n; ++i) d[i] -= g * (p[i] - t[i]);
                      }
                  },
                  "mse");
}

// ---- structural -----------------------------------------------------------

Var concat_cols(const std::vector<Var>& parts)
{
    require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t M = parts[0].shape().at(0);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.shape().size() == 2 && p.shape()[0] == M,
                "concat_cols: part " + shape_str(p.shape()) + " does not have " + std::to_string(M) + " rows");
        widths.push_back(p.shape()[1]);
        total += p.shape()[1];
    }
    Tensor out({M, total});
    std::size_t offset = 0;
    std::vector<std::shared_ptr<Node>> inputs;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const double* src = parts[k].value().data();
        for (std::size_t i = 0; i < M; ++i)
            std::copy_n(src + i * widths[k], widths[k], out.data() + i * total + offset);
        offset += widths[k];
        inputs.push_back(parts[k].node());
    }
    return record(std::move(out), std::move(inputs),
                  [M, total, widths](Node& self) {
                      std::size_t off = 0;
                      for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                          if (self.inputs[k]->requires_grad) {
                              double* d = self.inputs[k]->ensure_grad().data();
                              for (std::size_t i = 0; i < M; ++i)
                                  for (std::size_t j = 0; j < widths[k]; ++j)
                                      d[i * widths[k] + j] += self.grad[i * total + off + j];
                          }
                          off += widths[k];
                      }
                  },
                  "concat_cols");
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t count)
{
    const auto& xs = x.shape();
    require(xs.size() == 2 && count > 0 && begin + count <= xs[1],
            "slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                ") out of range for " + shape_str(xs));
    const std::size_t M = xs[0], N = xs[1];
    Tensor out({M, count});
    for (std::size_t i = 0; i < M; ++i) std::copy_n(x.value().data() + i * N + begin, count, out.data() + i * count);
    return record(std::move(out), {x.node()},
                  [M, N, begin, count](Node& self) {
                      double* d = self.inputs[0]->ensure_grad().data();
                      for (std::size_t i = 0; i < M; ++i)
                          for (std::size_t j = 0; j < count; ++j) d[i * N + begin + j] += self.grad[i * count + j];
                  },
                  "slice_cols");
}

Var gather_rows(const Var& src, const std::vector<long>& row_index, std::size_t per_row)
{
    const auto& ss = src.shape();
    require(ss.size() == 2, "gather_rows: source must be a matrix, got " + shape_str(ss));
    require(per_row > 0 && !row_index.empty() && row_index.size() % per_row == 0,
            "gather_rows: index count " + std::to_string(row_index.size()) + " not a multiple of " +
                std::to_string(per_row));
    const std::size_t R = ss[0], L = ss[1], M = row_index.size() / per_row;
    for (long r : row_index)
        require(r >= -1 && r < long(R), "gather_rows: row " + std::to_string(r) + " outside source of " +
                                            std::to_string(R) + " rows");
    Tensor out({M, per_row * L});
    const double* s = src.value().data();
    for (std::size_t q = 0; q < row_index.size(); ++q)
        if (row_index[q] >= 0) std::copy_n(s + std::size_t(row_index[q]) * L, L, out.data() + q * L);
    return record(std::move(out), {src.node()},
                  [L, row_index](Node& self) {
                      double* d = self.inputs[0]->ensure_grad().data();
                      for (std::size_t q = 0; q < row_index.size(); ++q) {
                          if (row_index[q] < 0) continue;
                          double* dst = d + std::size_t(row_index[q]) * L;
                          const double* g = self.grad.data() + q * L;
                          for (std::size_t j = 0; j < L; ++j) dst[j] += g[j];
                      }
                  },
                  "gather_rows");
}

} // namespace cmls::nn
