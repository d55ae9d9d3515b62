#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "sketchscene/adapters.hpp"

namespace sketchscene::wire {

// POSTs an adapter request document to {base_url}/invoke and returns the
// bytes of the first listed artifact. Maps transport failures to
// ConnectivityError and malformed or failed replies to ContractViolation.
std::vector<std::uint8_t> invoke(const HttpEndpoint& endpoint, const nlohmann::json& body);

}  // namespace sketchscene::wire
