#ifndef MAPDEN_TAPE_HPP
#define MAPDEN_TAPE_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "mapden/tensor.hpp"

namespace mapden::ad {

/// Handle to a value recorded on a Tape.
using VarId = std::size_t;

/// Dynamic reverse-mode tape rebuilt on every forward pass. One tape is
/// confined to a single thread; individual ops may parallelize internally
/// over disjoint output slots, which keeps results thread-count invariant.
///
/// Every op checks its output for non-finite values and raises NonFiniteError
/// naming itself. backward() may be called once per recorded graph.
class Tape {
public:
    /// Registers an external parameter/input. Values are copied; backward()
    /// accumulates into the Tensor's grad when requires_grad is set.
    VarId leaf(Tensor& t);

    /// A tape-owned constant with no gradient.
    VarId constant(Tensor t);

    /// Cross-correlation conv: x[B,Cin,L] * w[Cout,Cin,K] + b[Cout]
    /// -> [B,Cout,Lout], Lout = floor((L + 2*pad - K)/stride) + 1.
    VarId conv1d(VarId x, VarId w, VarId b, std::size_t stride, std::size_t padding);

    /// Transposed conv: x[B,Cin,L] * w[Cin,Cout,K] + b[Cout]
    /// -> [B,Cout,Lout], Lout = (L-1)*stride - 2*pad + K. Adjoint of conv1d
    /// in its input for the same weight array.
    VarId conv_transpose1d(VarId x, VarId w, VarId b, std::size_t stride,
                           std::size_t padding);

    /// x[B,N] * w[M,N]^T + b[M] -> [B,M].
    VarId linear(VarId x, VarId w, VarId b);

    VarId leaky_relu(VarId x, double alpha = 0.01);
    VarId flatten(VarId x);                 // [B, d1, d2, ...] -> [B, d1*d2*...]
    VarId reshape(VarId x, Shape shape);    // same numel
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);            // elementwise
    VarId scale(VarId a, double c);
    VarId add_scalar(VarId a, double c);
    VarId exp(VarId a);
    VarId square(VarId a);
    VarId sum(VarId a);                     // all elements -> shape {1}
    VarId mean(VarId a);
    VarId narrow(VarId a, std::size_t start, std::size_t len); // slice last dim

    const std::vector<double>& value(VarId id) const;
    const Shape& shape(VarId id) const;
    double scalar_value(VarId id) const;

    /// Reverse sweep from a scalar loss; fills leaf gradients (accumulating)
    /// and consumes the graph. Throws GraphConsumedError on reuse.
    void backward(VarId loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool needs_grad = false;
        Tensor* leaf = nullptr;
        // Propagates this node's grad into its inputs' grads.
        std::function<void(Tape&, Node&)> backprop;
        const char* op = "leaf";
    };

    Node& node(VarId id) { return nodes_[id]; }
    const Node& node(VarId id) const { return nodes_[id]; }
    VarId push(Node n);
    VarId unary_map(const char* op, VarId a, const std::function<double(double)>& f,
                    const std::function<double(double, double)>& df);
    void check_finite(const char* op, const std::vector<double>& values) const;
    std::vector<double>& grad_buffer(VarId id);

    std::vector<Node> nodes_;
    bool consumed_ = false;

    friend struct TapeTestAccess;
};

} // namespace mapden::ad

#endif
