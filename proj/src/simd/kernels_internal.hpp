#pragma once

#include "fedcvlc/simd/kernels.hpp"

namespace fedcvlc::simd::detail {

const KernelTable& scalar_table();

#if defined(FEDCVLC_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace fedcvlc::simd::detail
