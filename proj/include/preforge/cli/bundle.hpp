#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "preforge/measurement.hpp"
#include "preforge/spectrum.hpp"
#include "preforge/trajectory.hpp"

namespace preforge::cli {

using nlohmann::json;

inline constexpr int kBundleSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

json to_json(const RVector& v);
json to_json(const RMatrix& m);
json to_json(const CVector& v);  // [[re, im], ...]
json to_json(const CMatrix& m);

RVector real_vector(const json& j);
RMatrix real_matrix(const json& j);
CVector complex_vector(const json& j);
CMatrix complex_matrix(const json& j);

json model_json(const BlochModel& bm, const Spectrum& spec);
json subspace_json(const InvariantSubspace& s);
json symmetry_json(const WignerSymmetry& w, const WignerCertificate& c);
json ensemble_json(const Ensemble& e, const OperatorBasis& basis);
json verification_json(const VerificationReport& r);
json scheme_json(const AdaptiveScheme& s);
json scheme_report_json(const SchemeReport& r);
json trajectory_json(const TrajectoryStats& s);
json unconditional_json(const UnconditionalReport& r);

// Reads "states" (coherence vectors) or "state_vectors" (kets) plus "kappa".
Ensemble ensemble_from_json(const json& j, const OperatorBasis& basis);
AdaptiveScheme scheme_from_json(const json& j);

// Ensemble object from a file holding an ensemble, a list of ensembles, or a
// bundle with solutions.
json select_ensemble(const json& doc, int index);
json select_scheme(const json& doc);

json read_json_file(const std::string& path);

}  // namespace preforge::cli
