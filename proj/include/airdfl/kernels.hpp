#pragma once
// Dense double-precision vector kernels.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The variant is picked once at runtime from the CPU feature flags
// (override with AIRDFL_ISA=scalar|avx2 or select_isa()).
//
// Elementwise kernels (axpy, scale_into, axpby_into) produce bit-identical
// results across variants. Reductions (dot, squared_norm, squared_distance)
// use a different summation order in the vector variants and agree with the
// scalar reference only to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace airdfl {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_norm)(const double* a, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = alpha * x
  void (*scale_into)(double alpha, const double* x, double* y, std::size_t n);
  // z = alpha * x + beta * y
  void (*axpby_into)(double alpha, const double* x, double beta, const double* y, double* z,
                     std::size_t n);
};

namespace kernels {
const KernelTable& scalar_table();
// Null when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();
}  // namespace kernels

bool isa_available(Isa isa);

// Active table. Thread-safe after the first call.
const KernelTable& active_kernels();

// Switch the active variant. Throws InvalidInput if unavailable. Not meant to be
// called while other threads are running kernels.
void select_isa(Isa isa);

Isa parse_isa(std::string_view name);

// Span conveniences over the active table.
namespace vec {

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}
inline double squared_norm(std::span<const double> a) {
  return active_kernels().squared_norm(a.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active_kernels().squared_distance(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale_into(double alpha, std::span<const double> x, std::span<double> y) {
  active_kernels().scale_into(alpha, x.data(), y.data(), x.size());
}
inline void axpby_into(double alpha, std::span<const double> x, double beta,
                       std::span<const double> y, std::span<double> z) {
  active_kernels().axpby_into(alpha, x.data(), beta, y.data(), z.data(), x.size());
}

}  // namespace vec
}  // namespace airdfl
