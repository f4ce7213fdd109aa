#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcx/design.hpp"
#include "mcx/inference.hpp"
#include "mcx/mcem.hpp"
#include "mcx/simulate.hpp"

namespace mcx {

// Trial layout as declared in a JSON config: treatments per period for each
// sequence, labelled treatments and responses, optional subject counts.
//
//   {
//     "treatments": ["placebo", "10mg", "25mg"],
//     "responses": 10,                       // or a list of labels
//     "sequences": [
//       {"label": "1", "treatments": ["10mg", "placebo", "25mg"], "subjects": 6},
//       ...
//     ]
//   }
struct DesignSpec {
  int periods = 0;
  std::vector<std::string> treatment_labels;
  std::vector<std::string> response_labels;
  std::vector<std::string> sequence_labels;
  std::vector<std::vector<int>> assignment;  // s x p, 0-based treatment index
  std::vector<int> subjects;                 // empty when not declared

  int sequences() const { return static_cast<int>(assignment.size()); }
  int treatments() const { return static_cast<int>(treatment_labels.size()); }
  int responses() const { return static_cast<int>(response_labels.size()); }
  bool subjects_declared() const { return !subjects.empty(); }

  Design make_design(std::vector<int> subject_counts) const;
  Design make_design() const;  // requires declared subject counts

  // Display names for the coefficient vector, using the declared labels:
  // Intercept, Period1.., Trt:<label>.., Res:<label>..
  std::vector<std::string> coef_names() const;

  int sequence_index(const std::string& label) const;  // -1 when unknown
};

DesignSpec design_spec_from_json(const std::string& text);

// A parsed dataset: the resolved design (subject counts filled in from the
// file when not declared), the data, and the subject labels per sequence in
// file order.
struct Dataset {
  Design design;
  TrialData data;
  std::vector<std::vector<std::string>> subject_labels;
  bool log_transformed = false;
};

// Reads the long-format CSV
//   sequence,subject,period,treatment,response,value
// An empty value field means missing; rows absent for a (subject, period)
// cell leave all its entries missing. Treatment labels are validated against
// the declared assignment; duplicate keys, unknown labels, and non-numeric
// values are reported with their row number. log_transform applies the
// natural log at ingestion (all values must be positive).
Dataset read_dataset_csv(const DesignSpec& spec, const std::string& path, bool log_transform = false);

// Writes a dataset in the same format, one row per entry (missing entries
// get an empty value field). Values are printed with enough digits that a
// write/read round trip reproduces them bit for bit.
void write_dataset_csv(const DesignSpec& spec, const Design& design, const TrialData& data,
                       const std::vector<std::vector<std::string>>& subject_labels,
                       const std::string& path);

// Option blocks shared by the config files; missing fields keep defaults.
McemOptions mcem_options_from_json(const std::string& text);
MiOptions mi_options_from_json(const std::string& text);

// Simulation scenario config: design (with subject counts), true parameters,
// missingness, replication count, plus optional "mcem"/"mi" option blocks.
struct ScenarioConfig {
  SimScenario scenario;
  McemOptions mcem;
  MiOptions mi;
  int threads = 0;  // 0 = hardware default
};

ScenarioConfig scenario_from_json(const std::string& text);

// Power study config: scenario fields plus hypothesis, grids, alpha, reps,
// and the statistic choice ("loglik" or "q").
struct PowerStudyConfig {
  PowerConfig power;
  McemOptions mcem;
  int threads = 0;
};

PowerStudyConfig power_config_from_json(const std::string& text);

}  // namespace mcx
