#pragma once

#include "cmls/field.hpp"

#include <vector>

namespace cmls::datagen::detail {

// Second-order central Laplacian with mirrored ghost cells (zero normal flux).
void neumann_laplacian(const Field& f, const std::vector<double>& inv_h2, Field& out);

} // namespace cmls::datagen::detail
