#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mve::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitCorruptIndex = 2;

/// Entry point behind the `mve` binary. `args` excludes the program name.
///
///   index  --corpus F --out DIR [--embeddings-dump F]
///   search --index DIR --query TEXT [--p N --strategy S ...]
///   sweep  --index DIR --queries F --qrels F --out CSV
///   eval   --run F --qrels F
///
/// Returns 0 on success, 1 on invalid input or config, 2 on a corrupt index.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mve::cli
