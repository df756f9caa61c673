#pragma once

#include "permea/ifs.hpp"
#include "permea/rational.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace permea {

using Json = nlohmann::ordered_json;

// Values in input files: 42 | 0.25 | "p/q" | {"rat": "p/q", "sqrt3": "p/q"}.
// Plain doubles are taken at their exact binary value.
Rat rat_from_json(const Json& v);
Ext ext_from_json(const Json& v);

IFSSystem parse_ifs_json(const std::string& text, const std::string& name_hint = "");

struct PatternData {
    int n = 0, m = 0;
    std::vector<std::pair<int, int>> cells;
    std::string name;
};
PatternData parse_pattern_json(const std::string& text, const std::string& name_hint = "");

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

// Embedded copies of the data/ files; keys are short names ("sierpinski-
// triangle", "bmc-48x10", ...) and full relative paths.
const char* builtin_text(const std::string& name);
std::vector<std::string> builtin_names();

// Report plumbing. Doubles are rounded to 12 significant digits before they
// enter a report so serialization is deterministic and round-trips exactly.
Json json_real(double v);
Json json_rat(const Rat& r);
Json json_point(const Point& p);
std::string dump_report(const Json& j);

// Minimal JSON-schema subset checker (type/required/properties/items/enum);
// enough to pin the report envelope against data/schema/report.schema.json.
bool schema_validate(const Json& schema, const Json& doc, std::string& error);

}  // namespace permea
