#include <cstdlib>
#include <string>

#include "csem/errors.hpp"
#include "kernels_backends.hpp"

namespace csem::kernels {
namespace {

const Ops<float> kScalarF32 = detail::make_scalar_f32();
const Ops<double> kScalarF64 = detail::make_scalar_f64();

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

struct Dispatch {
  Backend backend = Backend::scalar;
  const Ops<float>* f32 = &kScalarF32;
  const Ops<double>* f64 = &kScalarF64;

  void use(Backend b) {
    if (b == Backend::avx2) {
      backend = Backend::avx2;
      f32 = detail::avx2_f32();
      f64 = detail::avx2_f64();
    } else {
      backend = Backend::scalar;
      f32 = &kScalarF32;
      f64 = &kScalarF64;
    }
  }

  Dispatch() {
    Backend pick = supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("CSEM_KERNELS")) {
      std::string v(env);
      if (v == "scalar") {
        pick = Backend::scalar;
      } else if (v == "avx2" && supported(Backend::avx2)) {
        pick = Backend::avx2;
      }  // "auto" or anything else keeps the detected pick
    }
    use(pick);
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

const Ops<float>& f32() { return *dispatch().f32; }
const Ops<double>& f64() { return *dispatch().f64; }
Backend active() { return dispatch().backend; }

const char* name() {
  return dispatch().backend == Backend::avx2 ? "avx2" : "scalar";
}

bool supported(Backend b) {
  if (b == Backend::scalar) return true;
  return detail::avx2_f32() != nullptr && cpu_has_avx2();
}

void force(Backend b) {
  if (!supported(b)) {
    throw ConfigError("kernel backend not supported on this CPU");
  }
  dispatch().use(b);
}

const Ops<float>& scalar_f32() { return kScalarF32; }
const Ops<double>& scalar_f64() { return kScalarF64; }

}  // namespace csem::kernels
