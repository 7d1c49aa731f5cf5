#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cbdi {

enum class Direction { Below, Above };

enum class PathStatus { Alive, Extinct, Exploded };

struct SimConfig {
    double dt = 1e-3;                // base time step
    double eps_jump = 1.0;           // small-jump cutoff in (0, 1]
    bool gaussian_small_jumps = true; // variance-matched proxy for sub-eps jumps
    double x_explode = 1e12;         // explosion cap
    double t_max = 10.0;
    uint64_t seed = 1;
    long n_paths = 1;
    double coupling_cells = 0.05;    // spatial cell width for shared noise
    long max_record_points = 10000;  // per-path record budget
    double stiffness_cap = 2e-3;     // drift-stiffness limit per substep

    void validate() const;
};

/// Passage level tracked during simulation at full substep resolution.
struct PassageProbe {
    double level = 0.0;
    Direction dir = Direction::Below;
};

struct TrackedPassage {
    double level = 0.0;
    Direction dir = Direction::Below;
    bool hit = false;
    double time = 0.0;
};

/// One simulated trajectory. After absorption the recorded values continue as
/// the absorbing state (0 or the infinity sentinel) through t_max.
struct PathRecord {
    std::vector<double> times;
    std::vector<double> values;
    PathStatus status = PathStatus::Alive;
    double status_time = 0.0; // absorption/explosion time when status != Alive
    std::vector<std::pair<double, double>> jumps; // (t, h) for h >= eps_jump
    long dropped_jumps = 0;
    std::vector<TrackedPassage> tracked;

    bool extinct() const { return status == PathStatus::Extinct; }
    bool exploded() const { return status == PathStatus::Exploded; }
};

std::string to_string(PathStatus s);

} // namespace cbdi
