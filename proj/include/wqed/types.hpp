// types.hpp -- shared aliases and the error taxonomy used across the library.
//
// Error categories map 1:1 onto CLI exit codes:
//   config_error  -> 2  (bad schema / invalid parameter combinations)
//   numeric_error -> 3  (non-convergence, tolerance violations, degeneracies)
//   io_error      -> 4  (filesystem trouble)

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace wqed {

using cplx = std::complex<double>;

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr cplx iu{0.0, 1.0};  // imaginary unit

struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wqed
