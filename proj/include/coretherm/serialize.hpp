#pragma once

#include <cstdint>
#include <string>

#include "coretherm/arx.hpp"
#include "coretherm/power_model.hpp"
#include "json.hpp"

namespace coretherm {

// Model files are a one-line JSON header followed by the JSON payload:
//   {"format":"coretherm","kind":K,"version":1,"crc32":C,"bytes":N}\n
//   <payload, exactly N bytes>
// Loading verifies the version, the byte count and the CRC before parsing.
inline constexpr int kModelFormatVersion = 1;

std::uint32_t crc32(const std::string& data);

void save_model_json(const std::string& path, const std::string& kind,
                     const nlohmann::json& payload);

nlohmann::json load_model_json(const std::string& path,
                               const std::string& expected_kind);

nlohmann::json power_model_to_json(const PowerModel& m);
PowerModel power_model_from_json(const nlohmann::json& j);

nlohmann::json arx_model_to_json(const ArxModel& m);
ArxModel arx_model_from_json(const nlohmann::json& j);

nlohmann::json ident_diagnostics_to_json(const IdentDiagnostics& d);
IdentDiagnostics ident_diagnostics_from_json(const nlohmann::json& j);

}  // namespace coretherm
