#pragma once

// Internal: per-backend kernel tables, linked by the dispatcher.

#include "hte/kernels/kernels.hpp"

namespace hte::kernels {

namespace scalar {
extern const KernelTable kTable;
}

namespace avx2 {
// Null when this binary was built without the AVX2 translation unit.
const KernelTable* table();
}

}  // namespace hte::kernels
