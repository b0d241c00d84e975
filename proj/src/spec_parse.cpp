// SPDX-License-Identifier: Apache-2.0
#include <groundloop/error.hpp>
#include <groundloop/spec.hpp>

#include <cmath>
#include <memory>

namespace groundloop::spec
{

const char* toString(Level level)
{
    switch (level)
    {
        case Level::Reproduction: return "reproduction";
        case Level::Report: return "report";
        case Level::Journal: return "journal";
    }
    return "reproduction";
}

Level levelFromString(const std::string& s)
{
    if (s == "reproduction")
        return Level::Reproduction;
    if (s == "report")
        return Level::Report;
    if (s == "journal")
        return Level::Journal;
    throw Error(ErrorKind::Parse, "unknown abstraction level '" + s + "'", "/meta/level");
}

bool ModelSpec::has(const std::string& pointer) const
{
    return doc.contains(Json::json_pointer(pointer));
}

namespace
{

enum class Dim
{
    None,
    Length,
    Permeability,
    Pressure,
    Viscosity,
    Time,
    Density,
    Compressibility,
    Rate,
};

struct Node
{
    enum Kind
    {
        Object,
        Array,
        Quantity,
        Integer,
        Number,
        String,
        Bool,
        Completion,
    };
    Kind kind = Object;
    Dim dim = Dim::None;
    std::map<std::string, Node> fields;
    std::shared_ptr<Node> element;
    std::vector<std::string> choices;
    std::vector<std::string> required;
    int size = -1;
};

Node obj(std::map<std::string, Node> fields, std::vector<std::string> required = {})
{
    auto n = Node {};
    n.kind = Node::Object;
    n.fields = std::move(fields);
    n.required = std::move(required);
    return n;
}

Node arr(Node element, int size = -1)
{
    auto n = Node {};
    n.kind = Node::Array;
    n.element = std::make_shared<Node>(std::move(element));
    n.size = size;
    return n;
}

Node qty(Dim d)
{
    auto n = Node {};
    n.kind = Node::Quantity;
    n.dim = d;
    return n;
}

Node integer()
{
    auto n = Node {};
    n.kind = Node::Integer;
    return n;
}

Node number()
{
    auto n = Node {};
    n.kind = Node::Number;
    return n;
}

Node str(std::vector<std::string> choices = {})
{
    auto n = Node {};
    n.kind = Node::String;
    n.choices = std::move(choices);
    return n;
}

Node boolean()
{
    auto n = Node {};
    n.kind = Node::Bool;
    return n;
}

Node completion()
{
    auto n = Node {};
    n.kind = Node::Completion;
    return n;
}

const Node& schema()
{
    static const Node root = [] {
        auto well = obj({{"name", str()}, {"i", integer()}, {"j", integer()}}, {"i", "j"});
        auto permStat = obj({{"mean", qty(Dim::Permeability)}, {"std", qty(Dim::Permeability)}}, {"mean", "std"});
        auto fracStat = obj({{"mean", number()}, {"std", number()}}, {"mean", "std"});
        return obj({
            {"meta", obj({{"title", str()}, {"level", str({"reproduction", "report", "journal"})},
                          {"seed", integer()}, {"description", str()}})},
            {"mesh", obj({{"dims", arr(integer(), 3)}, {"extent", arr(qty(Dim::Length), 3)},
                          {"origin_depth", qty(Dim::Length)}})},
            {"deformation", obj({{"undulation_amplitude", qty(Dim::Length)},
                                 {"undulation_wavelength", qty(Dim::Length)},
                                 {"dome_amplitude", qty(Dim::Length)},
                                 {"dome_radius", qty(Dim::Length)},
                                 {"interface_depths", arr(qty(Dim::Length))}})},
            {"layers", obj({{"permeability", arr(permStat)},
                            {"porosity", obj({{"kind", str({"constant", "lognormal"})},
                                              {"value", number()},
                                              {"units", arr(fracStat)}})},
                            {"porosity_cap", number()}})},
            {"fluids", obj({{"viscosity", arr(qty(Dim::Viscosity), 2)},
                            {"density", arr(qty(Dim::Density), 2)},
                            {"relperm", obj({{"family", str({"quadratic", "brooks_corey"})},
                                             {"exponents", arr(number(), 2)},
                                             {"residuals", arr(number(), 2)},
                                             {"endpoints", arr(number(), 2)}})},
                            {"density_closure", obj({{"kind", str({"constant_compressibility", "incompressible"})},
                                                     {"reference_pressure", qty(Dim::Pressure)},
                                                     {"compressibility", arr(qty(Dim::Compressibility), 2)}})}})},
            {"initial", obj({{"pressure", qty(Dim::Pressure)}, {"sw", number()}})},
            {"wells", obj({{"injectors", arr(well)},
                           {"injector_placement", str({"corners"})},
                           {"producers", arr(well)},
                           {"producer_count", integer()},
                           {"producer_placement", str({"interior"})},
                           {"producer_bhp", qty(Dim::Pressure)},
                           {"radius", qty(Dim::Length)},
                           {"skin", number()},
                           {"injection_rate", qty(Dim::Rate)},
                           {"completion", completion()}})},
            {"schedule", obj({{"total_time", qty(Dim::Time)},
                              {"report_steps", integer()},
                              {"report_times", arr(qty(Dim::Time))},
                              {"target_pvi", number()}})},
            {"constraints", obj({{"boundary", str({"closed"})},
                                 {"gravity", boolean()},
                                 {"time_unit", str({"365d", "365.25d"})}})},
            {"sampling", obj({{"seed", integer()},
                              {"strategy", str({"layer_batched", "cell_interleaved"})},
                              {"rng_family", str()}})},
            {"solver", obj({{"newton_max_iters", integer()},
                            {"cnv_tolerance", number()},
                            {"mb_tolerance", number()},
                            {"well_tolerance", number()},
                            {"initial_dt", qty(Dim::Time)},
                            {"min_dt", qty(Dim::Time)},
                            {"max_dt", qty(Dim::Time)},
                            {"cut_factor", number()},
                            {"growth_factor", number()},
                            {"max_cuts_per_step", integer()},
                            {"max_saturation_change", number()}})},
        });
    }();
    return root;
}

double unitFactor(Dim dim, const std::string& unit, double yearSeconds, const std::string& where)
{
    auto bad = [&] {
        return Error(ErrorKind::Unit, "unknown or mismatched unit '" + unit + "'", where);
    };
    switch (dim)
    {
        case Dim::Length:
            if (unit == "m")
                return 1.0;
            if (unit == "km")
                return 1000.0;
            throw bad();
        case Dim::Permeability:
            if (unit == "mD")
                return petro::kMilliDarcy;
            if (unit == "D")
                return petro::kDarcy;
            if (unit == "m2")
                return 1.0;
            throw bad();
        case Dim::Pressure:
            if (unit == "bar")
                return 1e5;
            if (unit == "Pa")
                return 1.0;
            throw bad();
        case Dim::Viscosity:
            if (unit == "cP")
                return 1e-3;
            if (unit == "Pa_s")
                return 1.0;
            throw bad();
        case Dim::Time:
            if (unit == "s")
                return 1.0;
            if (unit == "day")
                return 86400.0;
            if (unit == "year")
                return yearSeconds;
            throw bad();
        case Dim::Density:
            if (unit == "kg/m3")
                return 1.0;
            throw bad();
        case Dim::Compressibility:
            if (unit == "1/Pa")
                return 1.0;
            if (unit == "1/bar")
                return 1e-5;
            throw bad();
        case Dim::Rate:
            if (unit == "m3/s")
                return 1.0;
            if (unit == "m3/day")
                return 1.0 / 86400.0;
            throw bad();
        case Dim::None: throw bad();
    }
    throw bad();
}

Json normalize(const Node& node, const Json& value, const std::string& where, double yearSeconds);

Json normalizeQuantity(const Node& node, const Json& value, const std::string& where, double yearSeconds)
{
    if (value.is_number())
        return value.get<double>();
    if (value.is_object())
    {
        for (const auto& [k, v]: value.items())
            if (k != "value" && k != "unit")
                throw Error(ErrorKind::Parse, "unknown key '" + k + "' in quantity", where + "/" + k);
        if (!value.contains("value") || !value.contains("unit") || !value["value"].is_number() ||
            !value["unit"].is_string())
            throw Error(ErrorKind::Parse, "quantity must be a number or {value, unit}", where);
        return value["value"].get<double>() * unitFactor(node.dim, value["unit"].get<std::string>(), yearSeconds, where);
    }
    throw Error(ErrorKind::Parse, "expected a quantity", where);
}

Json normalize(const Node& node, const Json& value, const std::string& where, double yearSeconds)
{
    switch (node.kind)
    {
        case Node::Object:
        {
            if (!value.is_object())
                throw Error(ErrorKind::Parse, "expected an object", where);
            auto out = Json::object();
            for (const auto& [k, v]: value.items())
            {
                auto it = node.fields.find(k);
                if (it == node.fields.end())
                    throw Error(ErrorKind::Parse, "unknown key '" + k + "'", where + "/" + k);
                out[k] = normalize(it->second, v, where + "/" + k, yearSeconds);
            }
            for (const auto& k: node.required)
                if (!out.contains(k))
                    throw Error(ErrorKind::Parse, "missing required key '" + k + "'", where + "/" + k);
            return out;
        }
        case Node::Array:
        {
            // {"value": [...], "unit": u} shorthand for arrays of quantities
            if (value.is_object() && node.element->kind == Node::Quantity && value.contains("value") &&
                value["value"].is_array())
            {
                if (value.size() != 2 || !value.contains("unit") || !value["unit"].is_string())
                    throw Error(ErrorKind::Parse, "array quantity must be {value: [...], unit}", where);
                auto factor = unitFactor(node.element->dim, value["unit"].get<std::string>(), yearSeconds, where);
                auto expanded = Json::array();
                for (const auto& v: value["value"])
                {
                    if (!v.is_number())
                        throw Error(ErrorKind::Parse, "expected numbers", where);
                    expanded.push_back(v.get<double>() * factor);
                }
                return normalize(node, expanded, where, yearSeconds);
            }
            if (!value.is_array())
                throw Error(ErrorKind::Parse, "expected an array", where);
            if (node.size >= 0 && int(value.size()) != node.size)
                throw Error(ErrorKind::Parse, "expected " + std::to_string(node.size) + " entries", where);
            auto out = Json::array();
            for (std::size_t n = 0; n < value.size(); ++n)
                out.push_back(normalize(*node.element, value[n], where + "/" + std::to_string(n), yearSeconds));
            return out;
        }
        case Node::Quantity: return normalizeQuantity(node, value, where, yearSeconds);
        case Node::Integer:
            if (!value.is_number_integer())
                throw Error(ErrorKind::Parse, "expected an integer", where);
            return value;
        case Node::Number:
            if (!value.is_number())
                throw Error(ErrorKind::Parse, "expected a number", where);
            return value.get<double>();
        case Node::String:
            if (!value.is_string())
                throw Error(ErrorKind::Parse, "expected a string", where);
            if (!node.choices.empty() &&
                std::find(node.choices.begin(), node.choices.end(), value.get<std::string>()) == node.choices.end())
                throw Error(ErrorKind::Parse, "invalid value '" + value.get<std::string>() + "'", where);
            return value;
        case Node::Bool:
            if (!value.is_boolean())
                throw Error(ErrorKind::Parse, "expected true or false", where);
            return value;
        case Node::Completion:
            if (value.is_string() && value.get<std::string>() == "full")
                return value;
            if (value.is_array() && value.size() == 2 && value[0].is_number_integer() && value[1].is_number_integer())
                return value;
            throw Error(ErrorKind::Parse, "completion must be \"full\" or [k_top, k_bottom]", where);
    }
    return value;
}

double yearSecondsOf(const Json& doc)
{
    if (doc.is_object() && doc.contains("constraints") && doc["constraints"].is_object() &&
        doc["constraints"].contains("time_unit") && doc["constraints"]["time_unit"] == "365.25d")
        return 365.25 * 86400.0;
    return kYear365;
}

void checkContradictions(const ModelSpec& spec)
{
    const auto& d = spec.doc;
    auto at = [&](const char* p) { return d.at(Json::json_pointer(p)); };
    if (spec.has("/meta/seed") && spec.has("/sampling/seed") && at("/meta/seed") != at("/sampling/seed"))
        throw Error(ErrorKind::Contradiction, "seed given twice with different values", "/meta/seed vs /sampling/seed");
    if (spec.has("/wells/producers") && spec.has("/wells/producer_count") &&
        at("/wells/producer_count").get<long>() != long(at("/wells/producers").size()))
        throw Error(ErrorKind::Contradiction, "producer count disagrees with the producer list",
                    "/wells/producer_count vs /wells/producers");
    if (spec.has("/wells/injectors") && spec.has("/wells/injector_placement"))
        throw Error(ErrorKind::Contradiction, "both explicit injectors and an injector placement rule given",
                    "/wells/injectors vs /wells/injector_placement");
    if (spec.has("/schedule/report_steps") && spec.has("/schedule/report_times") &&
        at("/schedule/report_steps").get<long>() != long(at("/schedule/report_times").size()))
        throw Error(ErrorKind::Contradiction, "report step count disagrees with the report times",
                    "/schedule/report_steps vs /schedule/report_times");
}

} // namespace

void enforceLevelMask(const ModelSpec& spec)
{
    auto forbid = [&](const char* pointer) {
        if (spec.has(pointer))
            throw Error(ErrorKind::Level,
                        std::string("field not allowed at ") + toString(spec.level) + " level", pointer);
    };
    if (spec.level == Level::Reproduction)
        return;
    forbid("/meta/seed");
    forbid("/sampling");
    forbid("/solver");
    if (spec.level == Level::Journal)
    {
        forbid("/wells/producers");
        forbid("/deformation/undulation_wavelength");
        forbid("/deformation/dome_radius");
        forbid("/deformation/interface_depths");
    }
}

ModelSpec parseSpecJson(const Json& document)
{
    if (document.is_null())
        return {};
    auto normalized = normalize(schema(), document, "", yearSecondsOf(document));
    // drop empty blocks so presence checks mean something
    for (auto it = normalized.begin(); it != normalized.end();)
        it = (it->is_object() && it->empty()) ? normalized.erase(it) : std::next(it);

    auto spec = ModelSpec {};
    spec.doc = std::move(normalized);
    if (spec.has("/meta/level"))
        spec.level = levelFromString(spec.doc["meta"]["level"].get<std::string>());
    if (spec.has("/meta/title"))
        spec.title = spec.doc["meta"]["title"].get<std::string>();
    enforceLevelMask(spec);
    checkContradictions(spec);
    return spec;
}

ModelSpec parseSpec(const std::string& text)
{
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    Json doc;
    try
    {
        doc = Json::parse(text);
    }
    catch (const Json::parse_error& e)
    {
        throw Error(ErrorKind::Parse, "malformed JSON document", "byte " + std::to_string(e.byte));
    }
    return parseSpecJson(doc);
}

Json normalizeAt(const std::string& pointer, const Json& value, double yearSeconds)
{
    const Node* node = &schema();
    auto ptr = Json::json_pointer(pointer);
    auto tokens = std::vector<std::string> {};
    for (auto p = ptr; !p.empty(); p = p.parent_pointer())
        tokens.insert(tokens.begin(), p.back());
    for (const auto& t: tokens)
    {
        if (node->kind == Node::Object)
        {
            auto it = node->fields.find(t);
            if (it == node->fields.end())
                throw Error(ErrorKind::Parse, "unknown key '" + t + "'", pointer);
            node = &it->second;
        }
        else if (node->kind == Node::Array)
            node = node->element.get();
        else
            throw Error(ErrorKind::Parse, "path descends into a scalar", pointer);
    }
    return normalize(*node, value, pointer, yearSeconds);
}

} // namespace groundloop::spec
