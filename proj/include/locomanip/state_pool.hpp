#pragma once

#include <vector>

#include "locomanip/nn.hpp"
#include "locomanip/priors.hpp"
#include "locomanip/rewards.hpp"
#include "locomanip/rng.hpp"
#include "locomanip/sim.hpp"

namespace locomanip::pool {

struct PoolEntry {
  sim::Snapshot snap;
  int trajectory_id = 0;
  int phase = 0;
  int iteration = 0;  // training iteration at insertion
};

// Validated intermediate states harvested from successful rollouts, with a
// per-trajectory quota so easy trajectories cannot flood the pool. Eviction
// is oldest-first within a trajectory.
class StatePool {
 public:
  StatePool() = default;
  StatePool(int capacity, int num_trajectories, int survive_steps = 50);

  // Admission gate: the episode must have survived at least survive_steps
  // control steps and the snapshot must pass check_termination against its
  // reference frame.
  bool try_insert(const sim::RobotModel& model, const sim::Snapshot& snap, int trajectory_id,
                  int phase, const rewards::ReferenceFrame& ref,
                  const rewards::TerminationConfig& term, int survived_steps, int iteration);

  // Uniform draw among entries of the trajectory, falling back to the whole
  // pool; nullptr when empty.
  const PoolEntry* sample(int trajectory_id, Rng& rng) const;

  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  int quota() const { return quota_; }
  int count(int trajectory_id) const;
  double mean_phase() const;
  const std::vector<PoolEntry>& entries() const { return entries_; }

  // Flat encoding for checkpoints: fixed stride per entry.
  static int entry_stride() { return 37; }
  void serialize(nn::Vec& out) const;  // size() * entry_stride() values
  void deserialize(const nn::Vec& data, int count);

 private:
  void evict_oldest_of(int trajectory_id);

  int capacity_ = 0;
  int quota_ = 0;
  int survive_steps_ = 50;
  int num_trajectories_ = 0;
  std::vector<PoolEntry> entries_;  // insertion order
  uint64_t insert_counter_ = 0;
  std::vector<uint64_t> entry_order_;
};

enum class InitMode { kSSI, kRSI, kPSPI, kRSIToPSPI };

InitMode init_mode_by_name(const std::string& name);
const char* init_mode_name(InitMode m);

struct InitSchedule {
  InitMode mode = InitMode::kRSIToPSPI;
  double p_max = 0.8;
  int ramp_iters = 1000;

  // Pool-draw probability at a given iteration (0 outside pool modes).
  double pool_prob(int iteration) const;
  void validate() const;
};

// Resolves ground and box penetrations by minimal translations, removes
// approaching velocity components, and verifies one physics substep keeps
// every contact force under 10x the system weight. Returns false (caller
// resamples) when any required translation exceeds 0.2 m or the stability
// check fails.
bool project_to_feasible(const sim::RobotModel& model, const sim::BoxModel& box,
                         const sim::SimConfig& config, const sim::PhysicalParams& params,
                         sim::RobotState& robot, sim::ObjectState& object);

struct InitResult {
  sim::RobotState robot;
  sim::ObjectState object;
  int phase = 0;
  bool from_pool = false;
};

// Draws an episode start: SSI projects frame 0, RSI a uniform frame, PSPI a
// pool entry (empty pool falls back to RSI), and the mixed mode ramps the
// pool probability from 0 to p_max.
InitResult sample_init(const StatePool& pool, const InitSchedule& sched,
                       const std::vector<rewards::ReferenceFrame>& ref,
                       const sim::RobotModel& model, const sim::BoxModel& box,
                       const sim::SimConfig& config, const sim::PhysicalParams& params,
                       int trajectory_id, int iteration, Rng& rng);

}  // namespace locomanip::pool
