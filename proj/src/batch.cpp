#include "chargesim/batch.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace chargesim {

namespace {

std::vector<std::uint64_t> split_seeds(std::uint64_t master, std::size_t batch) {
    std::vector<std::uint64_t> seeds(batch);
    for (std::size_t i = 0; i < batch; ++i) seeds[i] = env_seed(master, i);
    return seeds;
}

} // namespace

BatchEnv::BatchEnv(std::shared_ptr<const Environment> env, std::size_t batch, std::uint64_t master_seed,
                   bool auto_reset, std::size_t workers)
    : BatchEnv(std::move(env), split_seeds(master_seed, batch), auto_reset, workers) {}

BatchEnv::BatchEnv(std::shared_ptr<const Environment> env, std::vector<std::uint64_t> seeds, bool auto_reset,
                   std::size_t workers)
    : env_(std::move(env)), seeds_(std::move(seeds)), auto_reset_(auto_reset), workers_(workers == 0 ? 1 : workers) {
    if (!env_) throw std::invalid_argument("batch needs an environment");
    if (seeds_.empty()) throw std::invalid_argument("batch size must be at least 1");
    const std::size_t b = seeds_.size();
    states_.resize(b);
    obs_.assign(b * env_->observation_size(), 0.0);
    rewards_.assign(b, 0.0);
    dones_.assign(b, 0);
    infos_.resize(b);
    set_workers(workers_);
    reset();
}

void BatchEnv::set_workers(std::size_t workers) {
    workers_ = workers == 0 ? 1 : workers;
    arena_ = workers_ > 1 ? std::make_unique<tbb::task_arena>(static_cast<int>(workers_)) : nullptr;
}

void BatchEnv::reset() {
    const std::size_t n = obs_size();
    for (std::size_t i = 0; i < states_.size(); ++i) {
        states_[i] = env_->reset(seeds_[i], 0);
        env_->observe(states_[i], std::span<double>(obs_).subspan(i * n, n));
        rewards_[i] = 0.0;
        dones_[i] = 0;
    }
}

void BatchEnv::step_one(std::size_t i, std::span<const int> action) {
    EnvState& s = states_[i];
    const std::size_t n = obs_size();
    if (s.done) {
        rewards_[i] = 0.0;
        dones_[i] = 1;
        return;
    }
    rewards_[i] = env_->step(s, action, infos_[i]);
    dones_[i] = s.done ? 1 : 0;
    if (s.done && auto_reset_) s = env_->reset(seeds_[i], s.episode + 1);
    env_->observe(s, std::span<double>(obs_).subspan(i * n, n));
}

void BatchEnv::step(std::span<const int> actions) {
    const std::size_t a = action_size();
    if (actions.size() != size() * a)
        throw EnvError(EnvError::Kind::BadAction, "batch action matrix must be " + std::to_string(size()) + " x " +
                                                      std::to_string(a));
    auto row = [&](std::size_t i) { return actions.subspan(i * a, a); };
    if (workers_ <= 1 || size() == 1) {
        for (std::size_t i = 0; i < size(); ++i) step_one(i, row(i));
        return;
    }
    arena_->execute([&] {
        tbb::parallel_for(tbb::blocked_range<std::size_t>(0, size()), [&](const tbb::blocked_range<std::size_t>& r) {
            for (std::size_t i = r.begin(); i != r.end(); ++i) step_one(i, row(i));
        });
    });
}

void random_actions(Stream& rng, const Environment& env, std::span<int> out) {
    const auto choices = static_cast<std::uint64_t>(env.num_actions_per_slot());
    for (auto& v : out) v = static_cast<int>(rng.below(choices));
}

ThroughputReport throughput_probe(std::shared_ptr<const Environment> env, std::size_t batch,
                                  std::uint64_t total_steps, std::size_t workers, std::uint64_t seed) {
    if (total_steps == 0) throw std::invalid_argument("total_steps must be at least 1");
    BatchEnv bench(env, batch, seed, true, workers);
    std::vector<int> actions(batch * bench.action_size());
    Stream rng = Stream::keyed(seed, 0, 0, Phase::Policy);

    const std::uint64_t iterations = (total_steps + batch - 1) / batch;
    const auto start = std::chrono::steady_clock::now();
    for (std::uint64_t it = 0; it < iterations; ++it) {
        random_actions(rng, *env, actions);
        bench.step(actions);
    }
    const auto stop = std::chrono::steady_clock::now();

    ThroughputReport r;
    r.batch = batch;
    r.workers = bench.workers();
    r.total_steps = iterations * batch;
    r.seconds = std::chrono::duration<double>(stop - start).count();
    r.steps_per_second = r.seconds > 0.0 ? static_cast<double>(r.total_steps) / r.seconds : 0.0;
    r.hardware = hardware_fingerprint();
    return r;
}

std::string hardware_fingerprint() {
    std::string model = "unknown cpu";
    std::ifstream cpuinfo("/proc/cpuinfo");
    std::string line;
    while (std::getline(cpuinfo, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) model = line.substr(colon + 2);
            break;
        }
    }
    return model + " (" + std::to_string(std::thread::hardware_concurrency()) + " threads)";
}

} // namespace chargesim
