#include "mcx/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mcx/error.hpp"

namespace mcx {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw_data(what + ": malformed JSON");
  return j;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Design DesignSpec::make_design(std::vector<int> subject_counts) const {
  std::vector<int> flat;
  flat.reserve(static_cast<std::size_t>(sequences() * periods));
  for (const auto& row : assignment) flat.insert(flat.end(), row.begin(), row.end());
  return Design(sequences(), periods, treatments(), responses(), std::move(subject_counts), std::move(flat));
}

Design DesignSpec::make_design() const {
  if (!subjects_declared()) throw_invalid("design spec: subject counts were not declared");
  return make_design(subjects);
}

std::vector<std::string> DesignSpec::coef_names() const {
  std::vector<std::string> names;
  names.emplace_back("Intercept");
  for (int j = 1; j < periods; ++j) names.push_back("Period" + std::to_string(j));
  for (int k = 0; k + 1 < treatments(); ++k) names.push_back("Trt:" + treatment_labels[static_cast<std::size_t>(k)]);
  for (int l = 0; l + 1 < responses(); ++l) names.push_back("Res:" + response_labels[static_cast<std::size_t>(l)]);
  return names;
}

int DesignSpec::sequence_index(const std::string& label) const {
  for (std::size_t i = 0; i < sequence_labels.size(); ++i)
    if (sequence_labels[i] == label) return static_cast<int>(i);
  return -1;
}

DesignSpec design_spec_from_json(const std::string& text) {
  const json j = parse_json(text, "design config");
  DesignSpec spec;
  if (!j.contains("treatments") || !j["treatments"].is_array() || j["treatments"].empty())
    throw_data("design config: 'treatments' must be a non-empty array of labels");
  for (const auto& t : j["treatments"]) spec.treatment_labels.push_back(t.get<std::string>());

  if (!j.contains("responses")) throw_data("design config: 'responses' is required");
  if (j["responses"].is_number_integer()) {
    const int m = j["responses"].get<int>();
    if (m < 1) throw_data("design config: 'responses' must be >= 1");
    for (int l = 1; l <= m; ++l) spec.response_labels.push_back("R" + std::to_string(l));
  } else if (j["responses"].is_array() && !j["responses"].empty()) {
    for (const auto& r : j["responses"]) spec.response_labels.push_back(r.get<std::string>());
  } else {
    throw_data("design config: 'responses' must be a count or an array of labels");
  }

  if (!j.contains("sequences") || !j["sequences"].is_array() || j["sequences"].empty())
    throw_data("design config: 'sequences' must be a non-empty array");
  bool any_subjects = false, all_subjects = true;
  for (const auto& s : j["sequences"]) {
    if (!s.contains("treatments") || !s["treatments"].is_array())
      throw_data("design config: each sequence needs a 'treatments' array (one per period)");
    std::vector<int> row;
    for (const auto& t : s["treatments"]) {
      const std::string label = t.get<std::string>();
      int idx = -1;
      for (std::size_t k = 0; k < spec.treatment_labels.size(); ++k)
        if (spec.treatment_labels[k] == label) idx = static_cast<int>(k);
      if (idx < 0) throw_data("design config: sequence refers to unknown treatment '" + label + "'");
      row.push_back(idx);
    }
    if (spec.periods == 0) spec.periods = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != spec.periods)
      throw_data("design config: all sequences must cover the same number of periods");
    spec.assignment.push_back(std::move(row));
    spec.sequence_labels.push_back(s.contains("label") ? s["label"].get<std::string>()
                                                       : std::to_string(spec.assignment.size()));
    if (s.contains("subjects")) {
      any_subjects = true;
      spec.subjects.push_back(s["subjects"].get<int>());
    } else {
      all_subjects = false;
    }
  }
  if (any_subjects && !all_subjects)
    throw_data("design config: declare 'subjects' for every sequence or for none");
  if (spec.periods < 1) throw_data("design config: sequences must cover at least one period");

  // Surface bad counts/labels early with the design's own validation.
  spec.make_design(spec.subjects_declared() ? spec.subjects
                                            : std::vector<int>(static_cast<std::size_t>(spec.sequences()), 1));
  return spec;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

Dataset read_dataset_csv(const DesignSpec& spec, const std::string& path, bool log_transform) {
  std::ifstream in(path);
  if (!in) throw_io("dataset: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw_data("dataset: '" + path + "' is empty");
  if (split_csv_line(line) != std::vector<std::string>{"sequence", "subject", "period", "treatment", "response", "value"})
    throw_data("dataset: expected header 'sequence,subject,period,treatment,response,value'");

  struct Cell {
    bool present = false;
    bool observed = false;
    double value = 0.0;
  };
  const int s = spec.sequences();
  const int p = spec.periods;
  const int m = spec.responses();
  std::vector<std::vector<std::string>> subject_labels(static_cast<std::size_t>(s));
  std::vector<std::map<std::string, int>> subject_index(static_cast<std::size_t>(s));
  // cells[seq][subject][period * m + response]
  std::vector<std::vector<std::vector<Cell>>> cells(static_cast<std::size_t>(s));

  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string at = " (row " + std::to_string(line_no) + ")";
    if (fields.size() != 6) throw_data("dataset: expected 6 comma-separated fields" + at);

    const int seq = spec.sequence_index(fields[0]);
    if (seq < 0) throw_data("dataset: unknown sequence '" + fields[0] + "'" + at);

    int period = 0, response = 0;
    try {
      period = std::stoi(fields[2]);
      response = std::stoi(fields[4]);
    } catch (const std::exception&) {
      throw_data("dataset: period and response must be integers" + at);
    }
    if (period < 1 || period > p) throw_data("dataset: period out of 1.." + std::to_string(p) + at);
    if (response < 1 || response > m) throw_data("dataset: response out of 1.." + std::to_string(m) + at);

    const int expected_trt = spec.assignment[static_cast<std::size_t>(seq)][static_cast<std::size_t>(period - 1)];
    if (fields[3] != spec.treatment_labels[static_cast<std::size_t>(expected_trt)])
      throw_data("dataset: treatment '" + fields[3] + "' does not match the design cell (sequence " +
                 fields[0] + ", period " + fields[2] + " expects '" +
                 spec.treatment_labels[static_cast<std::size_t>(expected_trt)] + "')" + at);

    auto& index = subject_index[static_cast<std::size_t>(seq)];
    auto it = index.find(fields[1]);
    int subj;
    if (it == index.end()) {
      subj = static_cast<int>(subject_labels[static_cast<std::size_t>(seq)].size());
      index.emplace(fields[1], subj);
      subject_labels[static_cast<std::size_t>(seq)].push_back(fields[1]);
      cells[static_cast<std::size_t>(seq)].emplace_back(static_cast<std::size_t>(p * m));
    } else {
      subj = it->second;
    }

    Cell& cell = cells[static_cast<std::size_t>(seq)][static_cast<std::size_t>(subj)]
                      [static_cast<std::size_t>((period - 1) * m + (response - 1))];
    if (cell.present)
      throw_data("dataset: duplicate key (sequence " + fields[0] + ", subject " + fields[1] + ", period " +
                 fields[2] + ", response " + fields[4] + ")" + at);
    cell.present = true;

    if (!fields[5].empty()) {
      const char* begin = fields[5].c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end != begin + fields[5].size())
        throw_data("dataset: non-numeric value '" + fields[5] + "'" + at);
      if (log_transform) {
        if (!(v > 0.0)) throw_data("dataset: log transform requires positive values" + at);
        cell.value = std::log(v);
      } else {
        cell.value = v;
      }
      cell.observed = true;
    }
  }

  std::vector<int> counts;
  for (int i = 0; i < s; ++i) {
    const int found = static_cast<int>(subject_labels[static_cast<std::size_t>(i)].size());
    if (spec.subjects_declared()) {
      if (found != spec.subjects[static_cast<std::size_t>(i)])
        throw_data("dataset: sequence " + spec.sequence_labels[static_cast<std::size_t>(i)] + " declares " +
                   std::to_string(spec.subjects[static_cast<std::size_t>(i)]) + " subjects but the file has " +
                   std::to_string(found));
    }
    if (found < 1)
      throw_data("dataset: sequence " + spec.sequence_labels[static_cast<std::size_t>(i)] + " has no subjects");
    counts.push_back(found);
  }

  Design design = spec.make_design(counts);
  std::vector<Eigen::VectorXd> values;
  std::vector<std::vector<std::uint8_t>> observed;
  for (int i = 0; i < s; ++i) {
    const int len = design.seq_len(i);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(len);
    std::vector<std::uint8_t> o(static_cast<std::size_t>(len), 0);
    for (int q = 0; q < design.subjects(i); ++q) {
      const auto& row = cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)];
      for (int k = 0; k < design.per_subject(); ++k) {
        if (row[static_cast<std::size_t>(k)].observed) {
          v[q * design.per_subject() + k] = row[static_cast<std::size_t>(k)].value;
          o[static_cast<std::size_t>(q * design.per_subject() + k)] = 1;
        }
      }
    }
    values.push_back(std::move(v));
    observed.push_back(std::move(o));
  }

  Dataset out{std::move(design), TrialData(spec.make_design(counts), std::move(values), std::move(observed)),
              std::move(subject_labels), log_transform};
  return out;
}

void write_dataset_csv(const DesignSpec& spec, const Design& design, const TrialData& data,
                       const std::vector<std::vector<std::string>>& subject_labels,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_io("dataset: cannot write '" + path + "'");
  out << "sequence,subject,period,treatment,response,value\n";
  for (int i = 0; i < design.sequences(); ++i) {
    for (int q = 0; q < design.subjects(i); ++q) {
      const std::string& subj = subject_labels[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)];
      for (int j = 0; j < design.periods(); ++j) {
        const std::string& trt = spec.treatment_labels[static_cast<std::size_t>(design.treatment(i, j))];
        for (int l = 0; l < design.responses(); ++l) {
          const int k = design.entry_index(q, j, l);
          out << spec.sequence_labels[static_cast<std::size_t>(i)] << ',' << subj << ',' << (j + 1) << ',' << trt
              << ',' << (l + 1) << ',';
          if (data.is_observed(i, k)) out << format_value(data.values(i)[k]);
          out << '\n';
        }
      }
    }
  }
  if (!out) throw_io("dataset: write to '" + path + "' failed");
}

namespace {

McemOptions mcem_options_from(const json& j) {
  McemOptions o;
  if (j.contains("mc_initial")) o.mc_initial = j["mc_initial"].get<int>();
  if (j.contains("warmup_iters")) o.warmup_iters = j["warmup_iters"].get<int>();
  if (j.contains("mc_main")) o.mc_main = j["mc_main"].get<int>();
  if (j.contains("mc_polish")) o.mc_polish = j["mc_polish"].get<int>();
  if (j.contains("max_iter")) o.max_iter = j["max_iter"].get<int>();
  if (j.contains("tol")) o.tol = j["tol"].get<double>();
  if (j.contains("tol_window")) o.tol_window = j["tol_window"].get<int>();
  if (j.contains("var_floor")) o.var_floor = j["var_floor"].get<double>();
  if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
  o.validate();
  return o;
}

MiOptions mi_options_from(const json& j) {
  MiOptions o;
  if (j.contains("imputations")) o.imputations = j["imputations"].get<int>();
  if (j.contains("burn_in")) o.burn_in = j["burn_in"].get<int>();
  if (j.contains("repetitions")) o.repetitions = j["repetitions"].get<int>();
  if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
  o.validate();
  return o;
}

SimScenario scenario_from(const json& j) {
  if (!j.contains("design")) throw_data("scenario config: 'design' is required");
  const DesignSpec spec = design_spec_from_json(j["design"].dump());
  if (!spec.subjects_declared()) throw_data("scenario config: the design must declare subject counts");
  SimScenario scen{spec.make_design(), Params{}, 0.0, MissMode::element, 100, 1};
  if (!j.contains("beta") || !j["beta"].is_array())
    throw_data("scenario config: 'beta' must be an array of true coefficients");
  scen.truth.beta = Eigen::VectorXd(j["beta"].size());
  for (std::size_t k = 0; k < j["beta"].size(); ++k) scen.truth.beta[static_cast<long>(k)] = j["beta"][k].get<double>();
  if (!j.contains("sigma_e2") || !j.contains("sigma_s2"))
    throw_data("scenario config: 'sigma_e2' and 'sigma_s2' are required");
  scen.truth.sigma_e2 = j["sigma_e2"].get<double>();
  scen.truth.sigma_s2 = j["sigma_s2"].get<double>();
  if (j.contains("miss_prob")) scen.miss_prob = j["miss_prob"].get<double>();
  if (j.contains("miss_mode")) scen.miss_mode = miss_mode_from_string(j["miss_mode"].get<std::string>());
  if (j.contains("reps")) scen.reps = j["reps"].get<int>();
  if (j.contains("seed")) scen.seed = j["seed"].get<std::uint64_t>();
  scen.validate();
  return scen;
}

}  // namespace

McemOptions mcem_options_from_json(const std::string& text) {
  return mcem_options_from(parse_json(text, "mcem options"));
}

MiOptions mi_options_from_json(const std::string& text) {
  return mi_options_from(parse_json(text, "mi options"));
}

ScenarioConfig scenario_from_json(const std::string& text) {
  const json j = parse_json(text, "scenario config");
  ScenarioConfig cfg{scenario_from(j), McemOptions{}, MiOptions{}, 0};
  if (j.contains("mcem")) cfg.mcem = mcem_options_from(j["mcem"]);
  if (j.contains("mi")) cfg.mi = mi_options_from(j["mi"]);
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  return cfg;
}

PowerStudyConfig power_config_from_json(const std::string& text) {
  const json j = parse_json(text, "power config");
  PowerStudyConfig cfg{PowerConfig{scenario_from(j), Hypothesis{}, {}, {}, {}, 0.05, 1000, false},
                       McemOptions{}, 0};
  if (!j.contains("hypothesis")) throw_data("power config: 'hypothesis' is required");
  cfg.power.hypothesis = Hypothesis::parse(j["hypothesis"].get<std::string>());
  if (j.contains("subjects"))
    for (const auto& n : j["subjects"]) cfg.power.subjects.push_back(n.get<int>());
  else
    cfg.power.subjects = cfg.power.base.design.subjects();
  if (j.contains("miss_probs"))
    for (const auto& q : j["miss_probs"]) cfg.power.miss_probs.push_back(q.get<double>());
  else
    cfg.power.miss_probs.push_back(cfg.power.base.miss_prob);
  if (j.contains("effects"))
    for (const auto& e : j["effects"]) cfg.power.effects.push_back(e.get<double>());
  if (j.contains("alpha")) cfg.power.alpha = j["alpha"].get<double>();
  if (j.contains("reps")) cfg.power.reps = j["reps"].get<int>();
  if (j.contains("statistic")) {
    const std::string stat = j["statistic"].get<std::string>();
    if (stat == "q") cfg.power.use_q_statistic = true;
    else if (stat != "loglik") throw_data("power config: 'statistic' must be 'loglik' or 'q'");
  }
  if (j.contains("mcem")) cfg.mcem = mcem_options_from(j["mcem"]);
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  return cfg;
}

}  // namespace mcx
