#include "permea/io.hpp"

#include <permea_builtin_data.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace permea {

Rat rat_from_json(const Json& v) {
    if (v.is_number_integer()) return Rat(BigInt(v.get<int64_t>()));
    if (v.is_number_float()) return rat_from_double(v.get<double>());
    if (v.is_string()) return parse_rat(v.get<std::string>());
    throw std::invalid_argument("expected a number or \"p/q\" string");
}

Ext ext_from_json(const Json& v) {
    if (v.is_object()) {
        Rat a = v.contains("rat") ? rat_from_json(v.at("rat")) : Rat(0);
        Rat b = v.contains("sqrt3") ? rat_from_json(v.at("sqrt3")) : Rat(0);
        return Ext(a, b);
    }
    return Ext(rat_from_json(v));
}

IFSSystem parse_ifs_json(const std::string& text, const std::string& name_hint) {
    Json j = Json::parse(text);
    int dim = j.value("dim", 2);
    if (dim != 2 && dim != 3) throw std::invalid_argument("\"dim\" must be 2 or 3");
    if (!j.contains("maps") || !j.at("maps").is_array())
        throw std::invalid_argument("missing \"maps\" array");
    std::string name = j.value("name", name_hint);
    std::vector<Similarity> maps;
    for (const auto& mj : j.at("maps")) {
        Rat ratio = rat_from_json(mj.at("ratio"));
        const auto& tj = mj.at("translate");
        if (!tj.is_array() || static_cast<int>(tj.size()) != dim)
            throw std::invalid_argument("\"translate\" must have dim entries");
        Point t;
        t.dim = dim;
        for (int i = 0; i < dim; ++i) t.x[i] = ext_from_json(tj[i]);
        if (dim == 2) {
            double angle = mj.value("rotation_deg", 0.0);
            bool reflect = mj.value("reflect", false);
            maps.push_back(planar_similarity(ratio, angle, reflect, t));
        } else {
            Similarity f = identity_map(3);
            f.ratio = ratio;
            f.t = t;
            if (mj.contains("matrix")) {
                const auto& M = mj.at("matrix");
                if (!M.is_array() || M.size() != 3)
                    throw std::invalid_argument("\"matrix\" must be 3x3");
                for (int r = 0; r < 3; ++r) {
                    if (!M[r].is_array() || M[r].size() != 3)
                        throw std::invalid_argument("\"matrix\" must be 3x3");
                    for (int c = 0; c < 3; ++c) f.O[r][c] = ext_from_json(M[r][c]);
                }
            }
            maps.push_back(f);
        }
    }
    return make_ifs(dim, std::move(maps), name);
}

PatternData parse_pattern_json(const std::string& text, const std::string& name_hint) {
    Json j = Json::parse(text);
    PatternData p;
    p.n = j.at("n").get<int>();
    p.m = j.at("m").get<int>();
    p.name = j.value("name", name_hint);
    if (p.n <= 0 || p.m <= 0) throw std::invalid_argument("pattern dimensions must be positive");
    for (const auto& c : j.at("cells")) {
        int i = c.at(0).get<int>(), k = c.at(1).get<int>();
        if (i < 0 || i >= p.n || k < 0 || k >= p.m)
            throw std::invalid_argument("pattern cell out of range");
        p.cells.emplace_back(i, k);
    }
    return p;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

const char* builtin_text(const std::string& name) {
    const auto& files = builtin_data::files();
    auto it = files.find(name);
    if (it != files.end()) return it->second;
    for (const auto& [path, text] : files) {
        auto slash = path.rfind('/');
        std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
        auto dot = base.rfind('.');
        if (dot != std::string::npos) base = base.substr(0, dot);
        if (base == name) return text;
    }
    return nullptr;
}

std::vector<std::string> builtin_names() {
    std::vector<std::string> out;
    for (const auto& [path, text] : builtin_data::files()) out.push_back(path);
    return out;
}

Json json_real(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return Json(std::strtod(buf, nullptr));
}

Json json_rat(const Rat& r) { return Json(rat_to_string(r)); }

Json json_point(const Point& p) {
    Json a = Json::array();
    for (int i = 0; i < p.dim; ++i) a.push_back(json_real(p.xd(i)));
    return a;
}

std::string dump_report(const Json& j) { return j.dump(2) + "\n"; }

namespace {

bool type_matches(const std::string& t, const Json& doc) {
    if (t == "object") return doc.is_object();
    if (t == "array") return doc.is_array();
    if (t == "string") return doc.is_string();
    if (t == "number") return doc.is_number();
    if (t == "integer") return doc.is_number_integer();
    if (t == "boolean") return doc.is_boolean();
    if (t == "null") return doc.is_null();
    return false;
}

bool validate_rec(const Json& schema, const Json& doc, const std::string& at, std::string& error) {
    if (schema.contains("type")) {
        const auto& t = schema.at("type");
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(t.get<std::string>(), doc);
        } else {
            for (const auto& x : t) ok = ok || type_matches(x.get<std::string>(), doc);
        }
        if (!ok) {
            error = at + ": type mismatch";
            return false;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& x : schema.at("enum")) ok = ok || x == doc;
        if (!ok) {
            error = at + ": not in enum";
            return false;
        }
    }
    if (doc.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema.at("required"))
                if (!doc.contains(key.get<std::string>())) {
                    error = at + ": missing required key \"" + key.get<std::string>() + "\"";
                    return false;
                }
        if (schema.contains("properties"))
            for (const auto& [key, sub] : schema.at("properties").items())
                if (doc.contains(key) &&
                    !validate_rec(sub, doc.at(key), at + "." + key, error))
                    return false;
    }
    if (doc.is_array() && schema.contains("items")) {
        const auto& sub = schema.at("items");
        for (size_t i = 0; i < doc.size(); ++i)
            if (!validate_rec(sub, doc[i], at + "[" + std::to_string(i) + "]", error)) return false;
    }
    return true;
}

}  // namespace

bool schema_validate(const Json& schema, const Json& doc, std::string& error) {
    error.clear();
    return validate_rec(schema, doc, "$", error);
}

}  // namespace permea
