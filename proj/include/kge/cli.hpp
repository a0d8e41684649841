#pragma once

namespace kge {

/// Entry point behind the kge binary: train / eval / analyze / export /
/// gradcheck subcommands. Returns 0 on success, 1 on usage errors, 2 on
/// runtime failures. Set KGE_LOG=quiet to silence progress lines.
int run(int argc, const char* const* argv);

}  // namespace kge
