#pragma once

#include "ohtlab/array.hpp"
#include "ohtlab/fock.hpp"
#include "ohtlab/homodyne.hpp"
#include "ohtlab/moments.hpp"
#include "ohtlab/pattern.hpp"
#include "ohtlab/temporal.hpp"

#include <json.hpp>

#include <string>

namespace ohtlab {

using json = nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::string& path);      // DataError if unreadable
void write_file(const std::string& path, const std::string& bytes);

json state_spec_to_json(const StateSpec& s);
StateSpec state_spec_from_json(const json& j);      // ConfigError on bad fields
json detector_to_json(const DetectorModel& d);
DetectorModel detector_from_json(const json& j);
json schedule_to_json(const PhaseSchedule& s);
PhaseSchedule schedule_from_json(const json& j);

// ohtlab-quad-v1 (JSON Lines)
std::string quad_dataset_to_jsonl(const QuadratureDataset& ds);
QuadratureDataset quad_dataset_from_jsonl(const std::string& text);

// ohtlab-array-v1
std::string array_frames_to_jsonl(const ArrayFrameSet& f);
ArrayFrameSet array_frames_from_jsonl(const std::string& text);

// ohtlab-spectral-v1: one line of K records per pulse
std::string spectral_records_to_jsonl(const SpectralRecords& r);
SpectralRecords spectral_records_from_jsonl(const std::string& text);

/// Reads the first line of a JSON Lines file and returns its "format" string.
std::string jsonl_format(const std::string& text);

json density_matrix_to_json(const DensityMatrix& rho);
json density_matrix_to_json(const RhoEstimate& est);  // adds "errors"
DensityMatrix density_matrix_from_json(const json& j);

std::string wigner_to_csv(const WignerGrid& w);  // q,p,w
WignerGrid wigner_from_csv(const std::string& text);
std::string photon_numbers_to_csv(const PhotonNumberEstimate& p);  // n,p,stderr

json estimate_to_json(const Estimate& e);
json moment_report_to_json(const MomentReport& r);
std::string moment_report_to_csv(const MomentReport& r);  // quantity,value,stderr
json phase_distribution_to_json(const PhaseDistribution& p);
std::string phase_distribution_to_csv(const PhaseDistribution& p);  // phi,pr

std::string temporal_to_csv(const VectorXd& t, const VectorXcd& v);  // t,re,im
std::string map_to_csv(const VectorXd& omega, const VectorXd& t, const MatrixXd& m);  // omega,t,value

} // namespace ohtlab
