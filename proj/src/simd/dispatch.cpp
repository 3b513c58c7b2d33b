#include <atomic>
#include <cstdlib>
#include <string>

#include "c2f/error.hpp"
#include "c2f/simd/kernels.hpp"

namespace c2f::simd {
namespace {

constexpr KernelTable kScalar{scalar::dot, scalar::l1_distance, scalar::l2_squared, scalar::axpy};
#if defined(C2F_HAVE_AVX2)
constexpr KernelTable kAvx2{avx2::dot, avx2::l1_distance, avx2::l2_squared, avx2::axpy};
#endif
#if defined(C2F_HAVE_NEON)
constexpr KernelTable kNeon{neon::dot, neon::l1_distance, neon::l2_squared, neon::axpy};
#endif

bool cpu_supports(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(C2F_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(C2F_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend best_backend() {
  if (cpu_supports(Backend::avx2)) return Backend::avx2;
  if (cpu_supports(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

Backend initial_backend() {
  const char* env = std::getenv("C2F_SIMD");
  if (env == nullptr || std::string_view(env).empty() || std::string_view(env) == "auto") {
    return best_backend();
  }
  const Backend requested = parse_backend(env);
  if (!cpu_supports(requested)) {
    throw Error("simd", "C2F_SIMD requests unavailable backend '" + std::string(env) + "'");
  }
  return requested;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{&table_for(initial_backend())};
  return table;
}

}  // namespace

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
    if (cpu_supports(b)) out.push_back(b);
  }
  return out;
}

const KernelTable& table_for(Backend backend) {
  if (!cpu_supports(backend)) {
    throw Error("simd", "backend '" + std::string(to_string(backend)) + "' is not available");
  }
  switch (backend) {
#if defined(C2F_HAVE_AVX2)
    case Backend::avx2:
      return kAvx2;
#endif
#if defined(C2F_HAVE_NEON)
    case Backend::neon:
      return kNeon;
#endif
    default:
      return kScalar;
  }
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Backend active_backend() {
  const KernelTable* t = current().load(std::memory_order_relaxed);
  for (Backend b : available_backends()) {
    if (&table_for(b) == t) return b;
  }
  return Backend::scalar;
}

void set_backend(Backend backend) { current().store(&table_for(backend), std::memory_order_relaxed); }

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  if (name == "neon") return Backend::neon;
  throw Error("simd", "unknown SIMD backend '" + std::string(name) + "'");
}

}  // namespace c2f::simd
