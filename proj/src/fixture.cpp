#include "shopbot/agent_model.hpp"
#include "shopbot/fixture_data.hpp"

namespace shopbot {

std::string_view fixture_bundle_document() { return generated::kFixtureBundleJson; }

const AgentBundle& fixture_bundle() {
    static const AgentBundle bundle = parse_bundle(generated::kFixtureBundleJson);
    return bundle;
}

} // namespace shopbot
