#include "dtwin/artifacts.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_io.hpp"

namespace dtwin {

namespace {

std::string dump(const json& j) { return j.dump(1) + "\n"; }

json parse(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(fmt::format("malformed {} artifact: {}", what, e.what()));
  }
}

template <class Fn>
auto decode(std::string_view what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw std::runtime_error(fmt::format("malformed {} artifact: {}", what, e.what()));
  }
}

}  // namespace

std::string serialize(const CohortArtifact& a) {
  json patients = json::array();
  for (const auto& p : a.patients) {
    patients.push_back({{"id", p.id},
                        {"oracle", {{"theta_true", p.theta_true.reveal()}}},
                        {"observations", p.observations.entries}});
  }
  return dump({{"config_hash", a.config_hash}, {"patients", patients}});
}

CohortArtifact parse_cohort(std::string_view text) {
  const auto j = parse(text, "cohort");
  return decode("cohort", [&] {
    CohortArtifact a;
    a.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& p : j.at("patients")) {
      VirtualPatient v;
      v.id = p.at("id").get<std::string>();
      v.theta_true = OracleTruth(p.at("oracle").at("theta_true").get<PatientParameters>());
      v.observations.entries = p.at("observations").get<std::vector<Observation>>();
      v.observations.validate();
      a.patients.push_back(std::move(v));
    }
    return a;
  });
}

std::string serialize(const EnsembleArtifact& a) {
  json samples = json::array();
  for (const auto& s : a.ensemble.samples) samples.push_back(s.as_array());
  return dump({{"patient_id", a.patient_id},
               {"config_hash", a.config_hash},
               {"parameters", kParameterNames},
               {"diagnostics", a.ensemble.diagnostics},
               {"samples", samples}});
}

EnsembleArtifact parse_ensemble(std::string_view text) {
  const auto j = parse(text, "ensemble");
  return decode("ensemble", [&] {
    EnsembleArtifact a;
    a.patient_id = j.at("patient_id").get<std::string>();
    a.config_hash = j.at("config_hash").get<std::string>();
    a.ensemble.diagnostics = j.at("diagnostics").get<Diagnostics>();
    for (const auto& s : j.at("samples")) {
      const auto v = s.get<std::array<double, 4>>();
      a.ensemble.samples.push_back(PatientParameters::from_array(v));
    }
    return a;
  });
}

std::string serialize(const FrontArtifact& a) {
  return dump({{"patient_id", a.patient_id},
               {"config_hash", a.config_hash},
               {"points", a.front.points},
               {"soc_reference", a.front.soc_reference}});
}

FrontArtifact parse_front(std::string_view text) {
  const auto j = parse(text, "front");
  return decode("front", [&] {
    FrontArtifact a;
    a.patient_id = j.at("patient_id").get<std::string>();
    a.config_hash = j.at("config_hash").get<std::string>();
    a.front.points = j.at("points").get<std::vector<ParetoPoint>>();
    a.front.soc_reference = j.at("soc_reference").get<ParetoPoint>();
    return a;
  });
}

std::string serialize(const LogrankResult& r) { return dump(json(r)); }

void write_front_csv(std::ostream& out, const std::vector<FrontArtifact>& fronts) {
  out << "patient_id,d_max_gy,u1,u2,u3,u4,u5,u6,total_dose_gy,ttp_superquantile_days,objective\n";
  for (const auto& f : fronts) {
    for (const auto& p : f.front.points) {
      if (p.failed) continue;
      out << f.patient_id << ',' << fmt::format("{}", p.d_max);
      for (double u : p.regimen.weekly_doses) out << ',' << fmt::format("{}", u);
      out << fmt::format(",{},{},{}\n", p.total_dose, p.ttp_superquantile, p.objective);
    }
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace dtwin
