#include "mapden/tape.hpp"

#include <algorithm>
#include <cmath>

#include "mapden/parallel.hpp"

namespace mapden::ad {

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape s, std::vector<double> values, bool req_grad)
    : shape(std::move(s)), data(std::move(values)), requires_grad(req_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    if (requires_grad) grad.assign(data.size(), 0.0);
}

Tensor Tensor::zeros(Shape s, bool req_grad) {
    const std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0), req_grad);
}

Tensor Tensor::full(Shape s, double value, bool req_grad) {
    const std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(n, value), req_grad);
}

void Tensor::zero_grad() {
    if (requires_grad) grad.assign(data.size(), 0.0);
}

void Tensor::validate(const char* who) const {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError(std::string(who) + ": data length " + std::to_string(data.size()) +
                         " vs shape " + shape_str(shape));
    }
    if (requires_grad && grad.size() != data.size()) {
        throw ShapeError(std::string(who) + ": grad length " + std::to_string(grad.size()) +
                         " vs shape " + shape_str(shape));
    }
    for (double v : data) {
        if (!std::isfinite(v)) throw NonFiniteError(who);
    }
}

void Tape::check_finite(const char* op, const std::vector<double>& values) const {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NonFiniteError(std::string("produced by op '") + op + "'");
        }
    }
}

VarId Tape::push(Node n) {
    check_finite(n.op, n.value);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

VarId Tape::leaf(Tensor& t) {
    t.validate("leaf");
    Node n;
    n.shape = t.shape;
    n.value = t.data;
    n.needs_grad = t.requires_grad;
    n.leaf = t.requires_grad ? &t : nullptr;
    return push(std::move(n));
}

VarId Tape::constant(Tensor t) {
    t.requires_grad = false;
    t.validate("constant");
    Node n;
    n.shape = std::move(t.shape);
    n.value = std::move(t.data);
    n.op = "constant";
    return push(std::move(n));
}

const std::vector<double>& Tape::value(VarId id) const { return node(id).value; }
const Shape& Tape::shape(VarId id) const { return node(id).shape; }

double Tape::scalar_value(VarId id) const {
    const Node& n = node(id);
    if (n.value.size() != 1) {
        throw ShapeError("scalar_value on shape " + shape_str(n.shape));
    }
    return n.value[0];
}

std::vector<double>& Tape::grad_buffer(VarId id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

// ---------------------------------------------------------------------------
// Convolutions
//
// Every conv walks a zero-padded, phase-split copy of its gather side:
// padded index i = l*stride + k maps to phase r = k % stride at position
// l + k/stride, so each kernel tap touches one contiguous run regardless of
// stride, with no per-tap bounds.
// ---------------------------------------------------------------------------

namespace {

// Hot inner kernels. restrict-qualified so they vectorize; the dot reduction
// uses four fixed accumulators (deterministic order).
inline void axpy(std::size_t n, double a, const double* __restrict x, double* __restrict y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}
inline double dot(std::size_t n, const double* __restrict a, const double* __restrict b) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) acc0 += a[i] * b[i];
    return (acc0 + acc1) + (acc2 + acc3);
}

// Layout of one padded, phase-split row (row length n, padding p, stride s).
struct PhaseLayout {
    std::size_t n = 0, pad = 0, stride = 1;
    std::size_t padded = 0;               // n + 2*pad
    std::size_t starts[8] = {0};          // block start per phase (stride <= 8)
    std::size_t row_size = 0;

    PhaseLayout() = default;
    PhaseLayout(std::size_t n_, std::size_t pad_, std::size_t stride_)
        : n(n_), pad(pad_), stride(stride_), padded(n_ + 2 * pad_) {
        std::size_t at = 0;
        for (std::size_t r = 0; r < stride; ++r) {
            starts[r] = at;
            at += (padded - r + stride - 1) / stride;
        }
        row_size = at;
    }

    // block offset of padded index i
    std::size_t slot(std::size_t i) const { return starts[i % stride] + i / stride; }
    // contiguous run for kernel tap k starts here; l in [0, l_count) reads slot + l
    std::size_t tap_start(std::size_t k) const { return starts[k % stride] + k / stride; }
};

// Splits src (length layout.n) into dst as a zero-padded phase-split row.
inline void split_row(const PhaseLayout& layout, const double* __restrict src,
                      double* __restrict dst) {
    std::fill(dst, dst + layout.row_size, 0.0);
    for (std::size_t i = 0; i < layout.n; ++i) {
        dst[layout.slot(i + layout.pad)] = src[i];
    }
}

// Adds the interior of a phase-split accumulator back onto dst (length layout.n).
inline void merge_row(const PhaseLayout& layout, const double* __restrict src,
                      double* __restrict dst) {
    for (std::size_t i = 0; i < layout.n; ++i) {
        dst[i] += src[layout.slot(i + layout.pad)];
    }
}

struct Conv1dDims {
    std::size_t batch, cin, cout, len, klen, lout, stride, pad;
};

std::vector<double> split_tensor_rows(const PhaseLayout& layout, const double* values,
                                      std::size_t rows) {
    std::vector<double> out(rows * layout.row_size);
    parallel_for(rows, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            split_row(layout, values + r * layout.n, out.data() + r * layout.row_size);
        }
    });
    return out;
}

} // namespace

VarId Tape::conv1d(VarId x, VarId w, VarId b, std::size_t stride, std::size_t padding) {
    const Node& xn = node(x);
    const Node& wn = node(w);
    const Node& bn = node(b);
    if (xn.shape.size() != 3 || wn.shape.size() != 3 || bn.shape.size() != 1) {
        throw ShapeError("conv1d expects x[B,Cin,L] " + shape_str(xn.shape) +
                         ", w[Cout,Cin,K] " + shape_str(wn.shape) + ", b[Cout] " +
                         shape_str(bn.shape));
    }
    Conv1dDims d{};
    d.batch = xn.shape[0];
    d.cin = xn.shape[1];
    d.len = xn.shape[2];
    d.cout = wn.shape[0];
    d.klen = wn.shape[2];
    d.stride = stride;
    d.pad = padding;
    if (wn.shape[1] != d.cin || bn.shape[0] != d.cout) {
        throw ShapeError("conv1d channel mismatch: x " + shape_str(xn.shape) + " vs w " +
                         shape_str(wn.shape) + " vs b " + shape_str(bn.shape));
    }
    if (stride == 0 || stride > 8) {
        throw InvalidParamsError("conv1d stride must be in [1, 8]");
    }
    const std::ptrdiff_t lout_signed =
        (static_cast<std::ptrdiff_t>(d.len) + 2 * static_cast<std::ptrdiff_t>(padding) -
         static_cast<std::ptrdiff_t>(d.klen)) /
            static_cast<std::ptrdiff_t>(stride) +
        1;
    if (lout_signed < 1) {
        throw ShapeError("conv1d output length < 1 for x " + shape_str(xn.shape) + ", w " +
                         shape_str(wn.shape));
    }
    d.lout = static_cast<std::size_t>(lout_signed);

    Node out;
    out.op = "conv1d";
    out.shape = {d.batch, d.cout, d.lout};
    out.value.resize(d.batch * d.cout * d.lout);
    out.needs_grad = xn.needs_grad || wn.needs_grad || bn.needs_grad;

    const PhaseLayout layout(d.len, d.pad, d.stride);
    const std::vector<double> xp = split_tensor_rows(layout, xn.value.data(), d.batch * d.cin);

    const double* wv = wn.value.data();
    const double* bv = bn.value.data();
    double* yv = out.value.data();

    parallel_for(d.batch * d.cout, [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc(d.lout);
        for (std::size_t bc = begin; bc < end; ++bc) {
            const std::size_t bi = bc / d.cout;
            const std::size_t co = bc % d.cout;
            std::fill(acc.begin(), acc.end(), bv[co]);
            for (std::size_t ci = 0; ci < d.cin; ++ci) {
                const double* xrow = xp.data() + (bi * d.cin + ci) * layout.row_size;
                const double* wrow = wv + (co * d.cin + ci) * d.klen;
                for (std::size_t k = 0; k < d.klen; ++k) {
                    axpy(d.lout, wrow[k], xrow + layout.tap_start(k), acc.data());
                }
            }
            std::copy(acc.begin(), acc.end(), yv + bc * d.lout);
        }
    });

    out.backprop = [x, w, b, d](Tape& tape, Node& self) {
        const double* dy = self.grad.data();
        Node& xn2 = tape.node(x);
        Node& wn2 = tape.node(w);
        Node& bn2 = tape.node(b);
        const PhaseLayout layout(d.len, d.pad, d.stride);

        if (xn2.needs_grad) {
            double* dx = tape.grad_buffer(x).data();
            const double* wv2 = wn2.value.data();
            parallel_for(d.batch * d.cin, [&](std::size_t begin, std::size_t end) {
                std::vector<double> acc(layout.row_size);
                for (std::size_t bc = begin; bc < end; ++bc) {
                    const std::size_t bi = bc / d.cin;
                    const std::size_t ci = bc % d.cin;
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (std::size_t co = 0; co < d.cout; ++co) {
                        const double* dyrow = dy + (bi * d.cout + co) * d.lout;
                        const double* wrow = wv2 + (co * d.cin + ci) * d.klen;
                        for (std::size_t k = 0; k < d.klen; ++k) {
                            axpy(d.lout, wrow[k], dyrow, acc.data() + layout.tap_start(k));
                        }
                    }
                    merge_row(layout, acc.data(), dx + bc * d.len);
                }
            });
        }
        if (wn2.needs_grad) {
            const std::vector<double> xp2 =
                split_tensor_rows(layout, xn2.value.data(), d.batch * d.cin);
            double* dw = tape.grad_buffer(w).data();
            parallel_for(d.cout, [&](std::size_t begin, std::size_t end) {
                for (std::size_t co = begin; co < end; ++co) {
                    for (std::size_t ci = 0; ci < d.cin; ++ci) {
                        double* dwrow = dw + (co * d.cin + ci) * d.klen;
                        for (std::size_t k = 0; k < d.klen; ++k) {
                            double acc = 0.0;
                            for (std::size_t bi = 0; bi < d.batch; ++bi) {
                                const double* dyrow = dy + (bi * d.cout + co) * d.lout;
                                const double* xrow =
                                    xp2.data() + (bi * d.cin + ci) * layout.row_size;
                                acc += dot(d.lout, dyrow, xrow + layout.tap_start(k));
                            }
                            dwrow[k] += acc;
                        }
                    }
                }
            });
        }
        if (bn2.needs_grad) {
            double* db = tape.grad_buffer(b).data();
            for (std::size_t co = 0; co < d.cout; ++co) {
                double acc = 0.0;
                for (std::size_t bi = 0; bi < d.batch; ++bi) {
                    const double* dyrow = dy + (bi * d.cout + co) * d.lout;
                    for (std::size_t l = 0; l < d.lout; ++l) acc += dyrow[l];
                }
                db[co] += acc;
            }
        }
    };
    return push(std::move(out));
}

VarId Tape::conv_transpose1d(VarId x, VarId w, VarId b, std::size_t stride,
                             std::size_t padding) {
    const Node& xn = node(x);
    const Node& wn = node(w);
    const Node& bn = node(b);
    if (xn.shape.size() != 3 || wn.shape.size() != 3 || bn.shape.size() != 1) {
        throw ShapeError("conv_transpose1d expects x[B,Cin,L] " + shape_str(xn.shape) +
                         ", w[Cin,Cout,K] " + shape_str(wn.shape) + ", b[Cout] " +
                         shape_str(bn.shape));
    }
    const std::size_t batch = xn.shape[0];
    const std::size_t cin = xn.shape[1];
    const std::size_t len = xn.shape[2];
    const std::size_t cout = wn.shape[1];
    const std::size_t klen = wn.shape[2];
    if (wn.shape[0] != cin || bn.shape[0] != cout) {
        throw ShapeError("conv_transpose1d channel mismatch: x " + shape_str(xn.shape) +
                         " vs w " + shape_str(wn.shape) + " vs b " + shape_str(bn.shape));
    }
    if (stride == 0 || stride > 8) {
        throw InvalidParamsError("conv_transpose1d stride must be in [1, 8]");
    }
    const std::ptrdiff_t lout_signed = static_cast<std::ptrdiff_t>((len - 1) * stride) -
                                       2 * static_cast<std::ptrdiff_t>(padding) +
                                       static_cast<std::ptrdiff_t>(klen);
    if (lout_signed < 1) {
        throw ShapeError("conv_transpose1d output length < 1 for x " + shape_str(xn.shape) +
                         ", w " + shape_str(wn.shape));
    }
    const auto lout = static_cast<std::size_t>(lout_signed);

    Node out;
    out.op = "conv_transpose1d";
    out.shape = {batch, cout, lout};
    out.value.resize(batch * cout * lout);
    out.needs_grad = xn.needs_grad || wn.needs_grad || bn.needs_grad;

    // The output is the padded side here: y[l*stride + k - pad] += x[l]*w[k].
    const PhaseLayout layout(lout, padding, stride);

    const double* xv = xn.value.data();
    const double* wv = wn.value.data();
    const double* bv = bn.value.data();
    double* yv = out.value.data();

    parallel_for(batch * cout, [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc(layout.row_size);
        for (std::size_t bc = begin; bc < end; ++bc) {
            const std::size_t bi = bc / cout;
            const std::size_t co = bc % cout;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* xrow = xv + (bi * cin + ci) * len;
                const double* wrow = wv + (ci * cout + co) * klen;
                for (std::size_t k = 0; k < klen; ++k) {
                    axpy(len, wrow[k], xrow, acc.data() + layout.tap_start(k));
                }
            }
            double* yrow = yv + bc * lout;
            std::fill(yrow, yrow + lout, bv[co]);
            merge_row(layout, acc.data(), yrow);
        }
    });

    out.backprop = [x, w, b, batch, cin, cout, len, klen, lout, stride,
                    padding](Tape& tape, Node& self) {
        const double* dy = self.grad.data();
        Node& xn2 = tape.node(x);
        Node& wn2 = tape.node(w);
        Node& bn2 = tape.node(b);
        const PhaseLayout layout(lout, padding, stride);

        // dy is the gather side for both dx and dw.
        std::vector<double> dyp;
        if (xn2.needs_grad || wn2.needs_grad) {
            dyp = split_tensor_rows(layout, dy, batch * cout);
        }

        if (xn2.needs_grad) {
            double* dx = tape.grad_buffer(x).data();
            const double* wv2 = wn2.value.data();
            parallel_for(batch * cin, [&](std::size_t begin, std::size_t end) {
                for (std::size_t bc = begin; bc < end; ++bc) {
                    const std::size_t bi = bc / cin;
                    const std::size_t ci = bc % cin;
                    double* dxrow = dx + bc * len;
                    for (std::size_t co = 0; co < cout; ++co) {
                        const double* dyrow = dyp.data() + (bi * cout + co) * layout.row_size;
                        const double* wrow = wv2 + (ci * cout + co) * klen;
                        for (std::size_t k = 0; k < klen; ++k) {
                            axpy(len, wrow[k], dyrow + layout.tap_start(k), dxrow);
                        }
                    }
                }
            });
        }
        if (wn2.needs_grad) {
            double* dw = tape.grad_buffer(w).data();
            const double* xv2 = xn2.value.data();
            parallel_for(cin, [&](std::size_t begin, std::size_t end) {
                for (std::size_t ci = begin; ci < end; ++ci) {
                    for (std::size_t co = 0; co < cout; ++co) {
                        double* dwrow = dw + (ci * cout + co) * klen;
                        for (std::size_t k = 0; k < klen; ++k) {
                            double acc = 0.0;
                            for (std::size_t bi = 0; bi < batch; ++bi) {
                                const double* xrow = xv2 + (bi * cin + ci) * len;
                                const double* dyrow =
                                    dyp.data() + (bi * cout + co) * layout.row_size;
                                acc += dot(len, xrow, dyrow + layout.tap_start(k));
                            }
                            dwrow[k] += acc;
                        }
                    }
                }
            });
        }
        if (bn2.needs_grad) {
            double* db = tape.grad_buffer(b).data();
            for (std::size_t co = 0; co < cout; ++co) {
                double acc = 0.0;
                for (std::size_t bi = 0; bi < batch; ++bi) {
                    const double* dyrow = dy + (bi * cout + co) * lout;
                    for (std::size_t l = 0; l < lout; ++l) acc += dyrow[l];
                }
                db[co] += acc;
            }
        }
    };
    return push(std::move(out));
}

// ---------------------------------------------------------------------------
// Dense / elementwise ops
// ---------------------------------------------------------------------------

VarId Tape::linear(VarId x, VarId w, VarId b) {
    const Node& xn = node(x);
    const Node& wn = node(w);
    const Node& bn = node(b);
    if (xn.shape.size() != 2 || wn.shape.size() != 2 || bn.shape.size() != 1 ||
        xn.shape[1] != wn.shape[1] || wn.shape[0] != bn.shape[0]) {
        throw ShapeError("linear expects x[B,N] " + shape_str(xn.shape) + ", w[M,N] " +
                         shape_str(wn.shape) + ", b[M] " + shape_str(bn.shape));
    }
    const std::size_t batch = xn.shape[0];
    const std::size_t in_dim = xn.shape[1];
    const std::size_t out_dim = wn.shape[0];

    Node out;
    out.op = "linear";
    out.shape = {batch, out_dim};
    out.value.resize(batch * out_dim);
    out.needs_grad = xn.needs_grad || wn.needs_grad || bn.needs_grad;

    const double* xv = xn.value.data();
    const double* wv = wn.value.data();
    const double* bv = bn.value.data();
    double* yv = out.value.data();
    parallel_for(batch, [&](std::size_t begin, std::size_t end) {
        for (std::size_t bi = begin; bi < end; ++bi) {
            const double* xrow = xv + bi * in_dim;
            double* yrow = yv + bi * out_dim;
            for (std::size_t m = 0; m < out_dim; ++m) {
                const double* wrow = wv + m * in_dim;
                double acc = bv[m];
                for (std::size_t n2 = 0; n2 < in_dim; ++n2) acc += xrow[n2] * wrow[n2];
                yrow[m] = acc;
            }
        }
    });

    out.backprop = [x, w, b, batch, in_dim, out_dim](Tape& tape, Node& self) {
        const double* dy = self.grad.data();
        Node& xn2 = tape.node(x);
        Node& wn2 = tape.node(w);
        Node& bn2 = tape.node(b);
        if (xn2.needs_grad) {
            double* dx = tape.grad_buffer(x).data();
            const double* wv2 = wn2.value.data();
            for (std::size_t bi = 0; bi < batch; ++bi) {
                const double* dyrow = dy + bi * out_dim;
                double* dxrow = dx + bi * in_dim;
                for (std::size_t m = 0; m < out_dim; ++m) {
                    const double g = dyrow[m];
                    const double* wrow = wv2 + m * in_dim;
                    for (std::size_t n2 = 0; n2 < in_dim; ++n2) dxrow[n2] += g * wrow[n2];
                }
            }
        }
        if (wn2.needs_grad) {
            double* dw = tape.grad_buffer(w).data();
            const double* xv2 = xn2.value.data();
            for (std::size_t bi = 0; bi < batch; ++bi) {
                const double* dyrow = dy + bi * out_dim;
                const double* xrow = xv2 + bi * in_dim;
                for (std::size_t m = 0; m < out_dim; ++m) {
                    const double g = dyrow[m];
                    double* dwrow = dw + m * in_dim;
                    for (std::size_t n2 = 0; n2 < in_dim; ++n2) dwrow[n2] += g * xrow[n2];
                }
            }
        }
        if (bn2.needs_grad) {
            double* db = tape.grad_buffer(b).data();
            for (std::size_t bi = 0; bi < batch; ++bi) {
                const double* dyrow = dy + bi * out_dim;
                for (std::size_t m = 0; m < out_dim; ++m) db[m] += dyrow[m];
            }
        }
    };
    return push(std::move(out));
}

VarId Tape::unary_map(const char* op, VarId a,
                      const std::function<double(double)>& f,
                      const std::function<double(double, double)>& df) {
    const Node& an = node(a);
    Node out;
    out.op = op;
    out.shape = an.shape;
    out.value.resize(an.value.size());
    out.needs_grad = an.needs_grad;
    for (std::size_t i = 0; i < an.value.size(); ++i) out.value[i] = f(an.value[i]);
    out.backprop = [a, df](Tape& tape, Node& self) {
        Node& an2 = tape.node(a);
        if (!an2.needs_grad) return;
        double* da = tape.grad_buffer(a).data();
        for (std::size_t i = 0; i < self.value.size(); ++i) {
            da[i] += self.grad[i] * df(an2.value[i], self.value[i]);
        }
    };
    return push(std::move(out));
}

VarId Tape::leaky_relu(VarId x, double alpha) {
    return unary_map(
        "leaky_relu", x, [alpha](double v) { return v > 0.0 ? v : alpha * v; },
        [alpha](double v, double) { return v > 0.0 ? 1.0 : alpha; });
}

VarId Tape::exp(VarId a) {
    return unary_map(
        "exp", a, [](double v) { return std::exp(v); },
        [](double, double y) { return y; });
}

VarId Tape::square(VarId a) {
    return unary_map(
        "square", a, [](double v) { return v * v; },
        [](double v, double) { return 2.0 * v; });
}

VarId Tape::scale(VarId a, double c) {
    return unary_map(
        "scale", a, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

VarId Tape::add_scalar(VarId a, double c) {
    return unary_map(
        "add_scalar", a, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

VarId Tape::flatten(VarId x) {
    const Node& xn = node(x);
    if (xn.shape.empty()) {
        throw ShapeError("flatten on scalar");
    }
    Shape s{xn.shape[0], xn.value.size() / xn.shape[0]};
    return reshape(x, std::move(s));
}

VarId Tape::reshape(VarId x, Shape shape) {
    const Node& xn = node(x);
    if (shape_numel(shape) != xn.value.size()) {
        throw ShapeError("reshape " + shape_str(xn.shape) + " -> " + shape_str(shape) +
                         " changes element count");
    }
    Node out;
    out.op = "reshape";
    out.shape = std::move(shape);
    out.value = xn.value;
    out.needs_grad = xn.needs_grad;
    out.backprop = [x](Tape& tape, Node& self) {
        Node& xn2 = tape.node(x);
        if (!xn2.needs_grad) return;
        double* dx = tape.grad_buffer(x).data();
        for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
    };
    return push(std::move(out));
}

namespace {

void check_same_shape(const char* op, const Shape& a, const Shape& b) {
    if (a != b) {
        throw ShapeError(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
    }
}

} // namespace

VarId Tape::add(VarId a, VarId b) {
    const Node& an = node(a);
    const Node& bn = node(b);
    check_same_shape("add", an.shape, bn.shape);
    Node out;
    out.op = "add";
    out.shape = an.shape;
    out.needs_grad = an.needs_grad || bn.needs_grad;
    out.value.resize(an.value.size());
    for (std::size_t i = 0; i < out.value.size(); ++i) {
        out.value[i] = an.value[i] + bn.value[i];
    }
    out.backprop = [a, b](Tape& tape, Node& self) {
        for (VarId v : {a, b}) {
            Node& n = tape.node(v);
            if (!n.needs_grad) continue;
            double* d = tape.grad_buffer(v).data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
        }
    };
    return push(std::move(out));
}

VarId Tape::sub(VarId a, VarId b) {
    const Node& an = node(a);
    const Node& bn = node(b);
    check_same_shape("sub", an.shape, bn.shape);
    Node out;
    out.op = "sub";
    out.shape = an.shape;
    out.needs_grad = an.needs_grad || bn.needs_grad;
    out.value.resize(an.value.size());
    for (std::size_t i = 0; i < out.value.size(); ++i) {
        out.value[i] = an.value[i] - bn.value[i];
    }
    out.backprop = [a, b](Tape& tape, Node& self) {
        Node& an2 = tape.node(a);
        if (an2.needs_grad) {
            double* da = tape.grad_buffer(a).data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i];
        }
        Node& bn2 = tape.node(b);
        if (bn2.needs_grad) {
            double* db = tape.grad_buffer(b).data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) db[i] -= self.grad[i];
        }
    };
    return push(std::move(out));
}

VarId Tape::mul(VarId a, VarId b) {
    const Node& an = node(a);
    const Node& bn = node(b);
    check_same_shape("mul", an.shape, bn.shape);
    Node out;
    out.op = "mul";
    out.shape = an.shape;
    out.needs_grad = an.needs_grad || bn.needs_grad;
    out.value.resize(an.value.size());
    for (std::size_t i = 0; i < out.value.size(); ++i) {
        out.value[i] = an.value[i] * bn.value[i];
    }
    out.backprop = [a, b](Tape& tape, Node& self) {
        Node& an2 = tape.node(a);
        Node& bn2 = tape.node(b);
        if (an2.needs_grad) {
            double* da = tape.grad_buffer(a).data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                da[i] += self.grad[i] * bn2.value[i];
            }
        }
        if (bn2.needs_grad) {
            double* db = tape.grad_buffer(b).data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                db[i] += self.grad[i] * an2.value[i];
            }
        }
    };
    return push(std::move(out));
}

VarId Tape::sum(VarId a) {
    const Node& an = node(a);
    Node out;
    out.op = "sum";
    out.shape = {1};
    out.needs_grad = an.needs_grad;
    double acc = 0.0;
    for (double v : an.value) acc += v;
    out.value = {acc};
    out.backprop = [a](Tape& tape, Node& self) {
        Node& an2 = tape.node(a);
        if (!an2.needs_grad) return;
        double* da = tape.grad_buffer(a).data();
        const double g = self.grad[0];
        for (std::size_t i = 0; i < an2.value.size(); ++i) da[i] += g;
    };
    return push(std::move(out));
}

VarId Tape::mean(VarId a) {
    const std::size_t n = node(a).value.size();
    if (n == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

VarId Tape::narrow(VarId a, std::size_t start, std::size_t len) {
    const Node& an = node(a);
    if (an.shape.empty()) throw ShapeError("narrow on scalar");
    const std::size_t last = an.shape.back();
    if (start + len > last || len == 0) {
        throw ShapeError("narrow [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of range for " +
                         shape_str(an.shape));
    }
    const std::size_t rows = an.value.size() / last;
    Node out;
    out.op = "narrow";
    out.shape = an.shape;
    out.shape.back() = len;
    out.needs_grad = an.needs_grad;
    out.value.resize(rows * len);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = an.value.data() + r * last + start;
        std::copy(src, src + len, out.value.data() + r * len);
    }
    out.backprop = [a, start, len, last, rows](Tape& tape, Node& self) {
        Node& an2 = tape.node(a);
        if (!an2.needs_grad) return;
        double* da = tape.grad_buffer(a).data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* g = self.grad.data() + r * len;
            double* dst = da + r * last + start;
            for (std::size_t i = 0; i < len; ++i) dst[i] += g[i];
        }
    };
    return push(std::move(out));
}

void Tape::backward(VarId loss) {
    if (consumed_) {
        throw GraphConsumedError("backward already ran on this tape");
    }
    Node& ln = node(loss);
    if (ln.value.size() != 1) {
        throw ShapeError("backward needs a scalar loss, got " + shape_str(ln.shape));
    }
    consumed_ = true;
    grad_buffer(loss)[0] = 1.0;

    // Creation order is topological; walk it backwards.
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.grad.empty()) continue;
        check_finite(n.op, n.grad);
        if (n.backprop) n.backprop(*this, n);
        if (n.leaf != nullptr) {
            for (std::size_t j = 0; j < n.grad.size(); ++j) {
                n.leaf->grad[j] += n.grad[j];
            }
        }
    }
}

} // namespace mapden::ad
