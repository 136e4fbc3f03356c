#pragma once

namespace posl {

/// Parallel kernels keep a serial reference path; both must produce
/// bit-identical results.
enum class Execution { serial, parallel };

int available_threads();

}  // namespace posl
