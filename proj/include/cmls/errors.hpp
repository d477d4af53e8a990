#pragma once

#include <stdexcept>
#include <string>

namespace cmls {

/// A non-finite value appeared; `timestep` is the frame being produced.
class NumericalError : public std::domain_error {
public:
    NumericalError(const std::string& what, std::size_t timestep) : std::domain_error(what), timestep_(timestep) {}
    std::size_t timestep() const { return timestep_; }

private:
    std::size_t timestep_;
};

} // namespace cmls
