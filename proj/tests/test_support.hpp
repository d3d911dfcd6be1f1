#pragma once

#include <cstdint>
#include <random>

#include "spinrs/sampling.hpp"

namespace spinrs_test {

inline spinrs::Rng rng(std::uint64_t stream) { return spinrs::make_rng(20240611u, stream); }

}  // namespace spinrs_test
