#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "catm/floquet_operator.hpp"
#include "catm/observables.hpp"
#include "catm/propagators.hpp"
#include "catm/spatial_model.hpp"
#include "catm/wave_operator.hpp"

namespace catm {

inline constexpr int kScenarioSchemaVersion = 1;

enum class ModelKind { surfaces, levels };
enum class RunKind { catm, sod, split, oracle, compare, scan_e0, scan_v0, multistep };

std::string run_kind_name(RunKind kind);

struct SurfaceModelConfig {
    SpatialGrid grid{256, 0.5, 12.0};
    SurfaceParams params;
    TruncationOptions truncation{200, std::nullopt};
    std::optional<double> bound_threshold;  // defaults to the Morse depth
    double bound_im_cutoff = 1e-6;
    bool cap_enabled = true;
};

struct LevelModelConfig {
    Eigen::VectorXcd energies;
    Eigen::MatrixXcd dipole;
    std::vector<int> bound_states;
};

struct MultistepConfig {
    int segments = 1;
    std::vector<double> segment_amplitudes;  // per-segment V0, empty uses absorber.amplitude
    SegmentTail tail;
};

struct ScanConfig {
    std::vector<double> values;
    std::vector<std::string> solvers{"configured"};  // "configured", "rdwa", "krylov"
    int threads = 0;                                 // 0 uses the hardware concurrency
};

struct ScenarioConfig {
    std::string name = "scenario";
    ModelKind model_kind = ModelKind::surfaces;
    SurfaceModelConfig surfaces;
    LevelModelConfig levels;
    PulseSpec pulse;
    TimeGrid time_grid;
    AbsorberEnvelope absorber;
    RepresentationConfig representation;
    SolverSettings solver;
    Eigen::VectorXcd initial_state;  // normalized, in the molecular eigenbasis
    std::optional<int> initial_index;
    RunKind run = RunKind::catm;
    StepConfig steps;  // sod and split
    OracleConfig oracle;
    std::vector<RunKind> compare_methods;
    ScanConfig scan;
    MultistepConfig multistep;
    std::string output_directory = "out";
};

// Parses and validates a scenario document. Errors are ConfigError with a JSON path.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::string& path);

// Molecular eigenbasis, bound-state set and optional norm metric for a configured model.
struct PreparedModel {
    LevelSystem system;
    std::vector<int> bound_states;
    std::optional<ComplexEigenbasis> basis;
    std::optional<SurfaceModel> surface_model;
    std::optional<Eigen::MatrixXcd> metric;  // R^H R w for the norm column
};

PreparedModel prepare_model(const ScenarioConfig& cfg);

// One CATM solve with its reconstruction on [0, T0].
struct CatmRun {
    FloquetSolution solution;
    WavefunctionSeries series;
    double epsilon = 0.0;
    double wall_seconds = 0.0;
};

CatmRun run_catm(const ScenarioConfig& cfg, const PreparedModel& model, const IterationLog& log = {});

struct SegmentReport {
    int index = 0;
    double start = 0.0;
    double amplitude = 0.0;
    int iterations = 0;
    double residual = 0.0;       // explicit eigen residual of the converged vector
    double deviation = 0.0;      // initial-condition deviation of the segment solve
    double join_mismatch = 0.0;  // |Psi_s(0) - Psi_{s-1}(end)| relative to the state norm
    int dropped_components = 0;
    double dropped_weight = 0.0;
    std::vector<double> residuals;
};

struct MultistepRun {
    WavefunctionSeries series;
    std::vector<SegmentReport> segments;
    double wall_seconds = 0.0;
};

// Segments [s T0 / k, (s + 1) T0 / k], each solved with its own tail and an absorber built
// from the previous segment's final state. k = 1 is the single-shot solve.
using SegmentLog = std::function<void(int segment, const IterationRecord&)>;
MultistepRun multistep_propagate(const ScenarioConfig& cfg, const PreparedModel& model, const SegmentLog& log = {});

struct ScanPoint {
    double value = 0.0;
    std::string solver;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
    double epsilon = 0.0;
    double final_dissociation = 0.0;
    double wall_seconds = 0.0;
    std::string message;
    ExtendedVector eigenvector;  // FBR eigenvector when converged
    cplx eigenvalue;
};

// Runs the scan points concurrently. Results are ordered by value, then solver.
std::vector<ScanPoint> run_scan(const ScenarioConfig& cfg, const PreparedModel& model);

// Normalized overlap |<a|b>| / (|a| |b|) of two extended vectors.
double eigenvector_overlap(const ExtendedVector& a, const ExtendedVector& b);

struct RunReport {
    bool converged = true;
    std::vector<std::string> files;
    nlohmann::json summary;
};

// Executes the configured pipeline and writes its files into directory.
RunReport run_scenario(const ScenarioConfig& cfg, const std::string& directory);

}  // namespace catm
