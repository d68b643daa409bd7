#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <tbb/task_arena.h>

#include "chargesim/env.hpp"

namespace chargesim {

/// Seed of environment slot `index` under a batch master seed.
inline std::uint64_t env_seed(std::uint64_t master_seed, std::size_t index) noexcept {
    return derive_seed(master_seed, index);
}

/// A batch of independent environments sharing one Environment definition.
///
/// Env i draws all randomness from (seed_i, episode_i, step, phase), so the
/// results do not depend on the number of workers or their scheduling. With
/// auto_reset a finished env is reset in place (episode counter + 1); its
/// terminal StepInfo stays in infos() and its observation row is the fresh
/// reset observation.
class BatchEnv {
public:
    BatchEnv(std::shared_ptr<const Environment> env, std::size_t batch, std::uint64_t master_seed,
             bool auto_reset = true, std::size_t workers = 1);

    /// Explicit per-env seeds instead of split(master, i).
    BatchEnv(std::shared_ptr<const Environment> env, std::vector<std::uint64_t> seeds, bool auto_reset = true,
             std::size_t workers = 1);

    /// Resets every env at episode 0 and refreshes observations.
    void reset();

    /// Steps every env. `actions` is row-major B x (N+1). Envs that are done
    /// without auto-reset are left untouched (reward 0, done stays true).
    void step(std::span<const int> actions);

    std::size_t size() const noexcept { return states_.size(); }
    std::size_t obs_size() const noexcept { return env_->observation_size(); }
    std::size_t action_size() const noexcept { return env_->action_size(); }
    const Environment& env() const noexcept { return *env_; }

    std::span<const double> observations() const noexcept { return obs_; }
    std::span<const double> observation(std::size_t i) const noexcept {
        return std::span<const double>(obs_).subspan(i * obs_size(), obs_size());
    }
    std::span<const double> rewards() const noexcept { return rewards_; }
    /// 1 where the env finished an episode in the last step.
    std::span<const std::uint8_t> dones() const noexcept { return dones_; }
    const std::vector<StepInfo>& infos() const noexcept { return infos_; }
    const std::vector<EnvState>& states() const noexcept { return states_; }
    const std::vector<std::uint64_t>& seeds() const noexcept { return seeds_; }

    std::size_t workers() const noexcept { return workers_; }
    void set_workers(std::size_t workers);

private:
    void step_one(std::size_t i, std::span<const int> action);

    std::shared_ptr<const Environment> env_;
    std::vector<std::uint64_t> seeds_;
    bool auto_reset_;
    std::size_t workers_;
    std::vector<EnvState> states_;
    std::vector<double> obs_;
    std::vector<double> rewards_;
    std::vector<std::uint8_t> dones_;
    std::vector<StepInfo> infos_;
    std::unique_ptr<tbb::task_arena> arena_;
};

/// Uniformly random action indices for every slot, drawn from `rng`.
void random_actions(Stream& rng, const Environment& env, std::span<int> out);

struct ThroughputReport {
    std::size_t batch = 1;
    std::size_t workers = 1;
    std::uint64_t total_steps = 0;
    double seconds = 0.0;
    double steps_per_second = 0.0;
    std::string hardware;
};

/// Times `total_steps` env-steps (aggregate over the batch) under a random
/// policy, auto-resetting finished episodes.
ThroughputReport throughput_probe(std::shared_ptr<const Environment> env, std::size_t batch,
                                  std::uint64_t total_steps, std::size_t workers = 1, std::uint64_t seed = 0);

/// CPU model and hardware thread count, e.g. "AMD EPYC 7543 (32 threads)".
std::string hardware_fingerprint();

} // namespace chargesim
