#pragma once

#include <istream>
#include <string>

#include "mmlm/lm.hpp"
#include "mmlm/training.hpp"

// Flat "key = value" run configuration covering the model, the training
// regime, and sequence packing. Unknown keys are rejected; echo() renders
// the fully-resolved configuration for the run log.

namespace mmlm {

struct RunConfig {
    LmConfig lm = LmConfig::desk();
    TrainConfig train;
    size_t seq_len = 64;

    // Ties the derived knobs together (resampler width and latent count
    // follow the decoder) and validates everything.
    void resolve();
    std::string echo() const;
};

// '#' starts a comment; blank lines are skipped; every other line must be
// "key = value" with a documented key.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);

} // namespace mmlm
