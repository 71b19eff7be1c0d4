#pragma once

#include <span>
#include <vector>

#include "arnqs/spec.hpp"

namespace arnqs {

/// Applies an activation to a vector. Softmax and SquareModulus act on the
/// whole vector and return a probability vector; the rest act element-wise.
///
/// Softmax subtracts the maximum before exponentiating. SquareModulus maps
/// an all-zero input to the uniform vector.
std::vector<double> activation_apply(Activation kind, std::span<const double> r);

/// Element-wise activation value and its derivative with respect to the
/// input. Only valid for Tanh, Identity, Relu and Sigmoid.
double activate(Activation kind, double x) noexcept;
double activate_derivative(Activation kind, double x, double y) noexcept;

bool is_elementwise(Activation kind) noexcept;

} // namespace arnqs
