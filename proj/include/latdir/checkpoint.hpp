// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "latdir/trainer.hpp"

namespace latdir {

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state);

/// Restores the full training state (networks, bank, optimizer moments, step).
TrainingState load_checkpoint(const std::filesystem::path& path);

/// As above, and verifies the architecture-defining fields match `expected`;
/// IncompatibleCheckpointError names both values of the first mismatch.
TrainingState load_checkpoint(const std::filesystem::path& path, const TrainConfig& expected);

}  // namespace latdir
