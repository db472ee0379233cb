#pragma once

namespace bypass {

/// Selects the serial reference path or the OpenMP path of a batch kernel.
/// Both paths produce bit-identical results; the serial one exists for
/// testing and benchmarking.
enum class Exec { Serial, Parallel };

}  // namespace bypass
