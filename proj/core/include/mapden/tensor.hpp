#ifndef MAPDEN_TENSOR_HPP
#define MAPDEN_TENSOR_HPP

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "mapden/errors.hpp"

namespace mapden::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape);

/// Dense row-major float64 tensor. grad has the same length as data whenever
/// requires_grad is set; gradients accumulate across backward calls until
/// zero_grad().
struct Tensor {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> values, bool req_grad = false);

    static Tensor zeros(Shape s, bool req_grad = false);
    static Tensor full(Shape s, double value, bool req_grad = false);

    std::size_t numel() const { return data.size(); }
    void zero_grad();

    /// Throws ShapeError/NonFiniteError when the invariants are broken.
    void validate(const char* who) const;
};

} // namespace mapden::ad

#endif
