#include <atomic>
#include <cstdlib>
#include <string>

#include "airdfl/error.hpp"
#include "airdfl/kernels.hpp"

namespace airdfl {
namespace kernels {

#if AIRDFL_HAVE_AVX2
const KernelTable& avx2_table_unchecked();
#endif

const KernelTable* avx2_table() {
#if AIRDFL_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

}  // namespace kernels

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  throw InvalidInput("unknown kernel ISA '" + std::string(name) + "' (expected scalar|avx2)");
}

bool isa_available(Isa isa) {
  return isa == Isa::scalar || kernels::avx2_table() != nullptr;
}

namespace {

const KernelTable* table_for(Isa isa) {
  return isa == Isa::avx2 ? kernels::avx2_table() : &kernels::scalar_table();
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("AIRDFL_ISA"); env != nullptr && *env != '\0') {
    const Isa requested = parse_isa(env);
    if (const KernelTable* t = table_for(requested)) return t;
    throw InvalidInput("AIRDFL_ISA=" + std::string(env) + " is not available on this CPU/build");
  }
  if (const KernelTable* t = kernels::avx2_table()) return t;
  return &kernels::scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_acquire); }

void select_isa(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (t == nullptr) {
    throw InvalidInput("kernel ISA '" + std::string(isa_name(isa)) + "' is not available");
  }
  active_slot().store(t, std::memory_order_release);
}

}  // namespace airdfl
