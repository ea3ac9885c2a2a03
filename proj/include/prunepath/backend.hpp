// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "prunepath/core.hpp"

namespace prunepath {

/// Source of trajectories: the simulator or a completion endpoint.
///
/// Implementations must be safe to call concurrently for distinct paths.
/// `draw` selects an independent re-sample of a stochastic stage; draw 0 is
/// the path's own continuation.
class TrajectoryBackend {
public:
    virtual ~TrajectoryBackend() = default;

    virtual std::string_view name() const = 0;

    virtual PathRecord launch_prefix(const QueryRecord& query, int path_id,
                                     std::int64_t prefix_length) = 0;

    virtual PathRecord resume_path(const PathRecord& path, const QueryRecord& query,
                                   std::uint64_t draw = 0) = 0;

    virtual std::vector<PathRecord> rollout_from_prefix(const PathRecord& path,
                                                        const QueryRecord& query, int rollouts,
                                                        std::uint64_t draw = 0) = 0;

    /// Tokens charged to the resume stage on top of the generated completion
    /// (prefix re-encoding when the backend cannot reuse cached state).
    virtual std::uint64_t resume_overhead_tokens(const PathRecord& /*launched*/) const { return 0; }
};

}  // namespace prunepath
