#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lightleak/colorlab.hpp"
#include "lightleak/error.hpp"

namespace lightleak::colorlab {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "lightleak-calibration";
constexpr int kVersion = 1;
constexpr const char* kChannelNames[3] = {"red", "green", "blue"};

}  // namespace

std::string calibration_to_json(const ResponseCalibration& cal) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["name"] = cal.name();
  doc["global_peak"] = cal.global_peak();
  doc["luminance_weights"] = cal.luminance_weights();
  for (int c = 0; c < 3; ++c) {
    json ch;
    json knots = json::array();
    for (const auto& k : cal.knots()[c]) knots.push_back({k.x, k.y});
    ch["knots"] = std::move(knots);
    ch["peak_response"] = cal.peak_response(c);
    ch["polynomial"] = cal.correction_polynomial(c).coefficients();
    doc["channels"][kChannelNames[c]] = std::move(ch);
  }
  json rows = json::array();
  const auto factors = cal.hue_factors();
  const auto sens = cal.hue_sensitivity();
  for (int h = 0; h < kHueBins; ++h) {
    rows.push_back({h, factors[h][0], factors[h][1], factors[h][2], sens[h]});
  }
  doc["hue_table_columns"] = {"bin", "factor_r", "factor_g", "factor_b", "sensitivity"};
  doc["hue_table"] = std::move(rows);
  return doc.dump(1);
}

ResponseCalibration calibration_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::calibration_invalid, std::string("calibration parse error: ") + e.what());
  }
  try {
    if (doc.value("format", "") != kFormat || doc.value("version", 0) != kVersion) {
      throw Error(Errc::calibration_invalid, "not a version-1 lightleak calibration");
    }
    ResponseCalibration::ChannelKnots knots;
    for (int c = 0; c < 3; ++c) {
      for (const auto& k : doc.at("channels").at(kChannelNames[c]).at("knots")) {
        knots[c].push_back({k.at(0).get<double>(), k.at(1).get<double>()});
      }
    }
    const auto weights = doc.at("luminance_weights").get<ResponseCalibration::Factors>();
    const auto name = doc.value("name", std::string("unnamed"));
    if (!doc.contains("hue_table")) {
      return ResponseCalibration::from_knots(std::move(knots), weights, name);
    }
    std::vector<ResponseCalibration::Factors> factors;
    std::vector<double> sens;
    int expected_bin = 0;
    for (const auto& row : doc.at("hue_table")) {
      if (row.at(0).get<int>() != expected_bin++) {
        throw Error(Errc::calibration_invalid, "hue_table rows must be ordered 0..359");
      }
      factors.push_back({row.at(1).get<double>(), row.at(2).get<double>(), row.at(3).get<double>()});
      sens.push_back(row.at(4).get<double>());
    }
    return ResponseCalibration::from_tables(std::move(knots), weights, std::move(factors),
                                            std::move(sens), name);
  } catch (const json::exception& e) {
    throw Error(Errc::calibration_invalid, std::string("calibration schema error: ") + e.what());
  }
}

ResponseCalibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open calibration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return calibration_from_json(ss.str());
}

void save_calibration(const ResponseCalibration& cal, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write calibration " + path.string());
  out << calibration_to_json(cal) << '\n';
}

}  // namespace lightleak::colorlab
