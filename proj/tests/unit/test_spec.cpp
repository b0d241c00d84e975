// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <groundloop/error.hpp>
#include <groundloop/pipeline.hpp>
#include <groundloop/spec.hpp>

#include <cctype>
#include <random>

using namespace groundloop;
using namespace groundloop::spec;

namespace
{

ExecutableConfig defaultConfig()
{
    return *resolve(ModelSpec {}).config;
}

bool containsKey(const std::vector<AmbiguityItem>& items, const std::string& key)
{
    return std::any_of(items.begin(), items.end(), [&](const auto& i) { return i.key == key; });
}

template <class F>
ErrorKind errorOf(F&& f)
{
    try
    {
        f();
    }
    catch (const Error& e)
    {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Io;
}

} // namespace

TEST_CASE("parse converts units to SI")
{
    auto spec = parseSpec(R"({
        "meta": {"title": "dome", "level": "journal"},
        "fluids": {"viscosity": {"value": [0.5, 5], "unit": "cP"}},
        "layers": {"permeability": [{"mean": {"value": 100, "unit": "mD"}, "std": {"value": 30, "unit": "mD"}}]},
        "initial": {"pressure": {"value": 150, "unit": "bar"}},
        "schedule": {"total_time": {"value": 2, "unit": "year"}}
    })");
    CHECK((spec.level == Level::Journal));
    CHECK(spec.title == "dome");
    CHECK(spec.doc["fluids"]["viscosity"][0].get<double>() == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(spec.doc["fluids"]["viscosity"][1].get<double>() == doctest::Approx(5e-3).epsilon(1e-15));
    CHECK(spec.doc["layers"]["permeability"][0]["mean"].get<double>() == doctest::Approx(9.869233e-14).epsilon(1e-15));
    CHECK(spec.doc["initial"]["pressure"].get<double>() == 1.5e7);
    CHECK(spec.doc["schedule"]["total_time"].get<double>() == 2.0 * 365.0 * 86400.0);

    auto leap = parseSpec(R"({"schedule": {"total_time": {"value": 1, "unit": "year"}},
                              "constraints": {"time_unit": "365.25d"}})");
    CHECK(leap.doc["schedule"]["total_time"].get<double>() == 365.25 * 86400.0);
}

TEST_CASE("empty document")
{
    auto spec = parseSpec("");
    CHECK(spec.doc.empty());
    CHECK((spec.level == Level::Reproduction));
    CHECK(parseSpec("{}").doc.empty());
    CHECK(parseSpec(R"({"solver": {}})").doc.empty());
}

TEST_CASE("parse errors")
{
    CHECK(errorOf([] { parseSpec(R"({"meta": {"level": "journal", "seed": 4}})"); }) == ErrorKind::Level);
    CHECK(errorOf([] { parseSpec(R"({"meta": {"level": "report"}, "solver": {"max_dt": 5}})"); }) ==
          ErrorKind::Level);
    CHECK(errorOf([] { parseSpec(R"({"meta": {"level": "journal"}, "wells": {"producers": []}})"); }) ==
          ErrorKind::Level);
    CHECK(errorOf([] { parseSpec(R"({"mesh": {"dims": [1, 2]}})"); }) == ErrorKind::Parse);
    CHECK(errorOf([] { parseSpec(R"({"mesh": {"colour": 1}})"); }) == ErrorKind::Parse);
    CHECK(errorOf([] { parseSpec(R"({"initial": {"pressure": {"value": 1, "unit": "psi"}}})"); }) ==
          ErrorKind::Unit);
    CHECK(errorOf([] { parseSpec(R"({"initial": {"pressure": {"value": 1, "unit": "cP"}}})"); }) ==
          ErrorKind::Unit);
    try
    {
        parseSpec("{\"mesh\": [1,,]}");
        FAIL("expected parse error");
    }
    catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(e.detail().find("byte") != std::string::npos);
    }
    CHECK(errorOf([] { parseSpec(R"({"meta": {"seed": 1}, "sampling": {"seed": 2}})"); }) ==
          ErrorKind::Contradiction);
    CHECK(errorOf([] {
              parseSpec(R"({"wells": {"producer_count": 2, "producers": [{"name": "P", "i": 1, "j": 1}]}})");
          }) == ErrorKind::Contradiction);
}

TEST_CASE("ambiguity detection")
{
    auto report = parseSpec(R"({"meta": {"level": "report"},
                                "fluids": {"viscosity": [5e-4, 5e-3], "density": [1000, 850]}})");
    auto items = detectAmbiguities(report);
    CHECK(containsKey(items, "density_closure"));
    CHECK_FALSE(containsKey(items, "fluid_viscosities"));
    for (std::size_t n = 1; n < items.size(); ++n)
    {
        auto order = [&](const std::string& key) {
            const auto& list = checklist().items;
            return std::find_if(list.begin(), list.end(), [&](const auto& i) { return i.key == key; }) - list.begin();
        };
        CHECK(order(items[n - 1].key) < order(items[n].key));
    }
    for (const auto& item: items)
    {
        CHECK_FALSE(item.proposedDefault.empty());
        CHECK_FALSE(item.rationale.empty());
    }

    auto complete = parseSpecJson(defaultConfig().toJson());
    CHECK(detectAmbiguities(complete).empty());

    auto seeded = complete.doc;
    seeded["sampling"].erase("strategy");
    seeded["sampling"].erase("rng_family");
    auto missingStrategy = detectAmbiguities(parseSpecJson(seeded));
    REQUIRE(missingStrategy.size() == 1);
    CHECK(missingStrategy[0].key == "sampling_strategy");
}

TEST_CASE("autonomous resolution is total")
{
    auto r = resolve(ModelSpec {});
    REQUIRE(r.config);
    CHECK_FALSE(r.needsAnswers());
    CHECK(r.ledger.entries.size() == checklist().items.size());
    for (const auto& e: r.ledger.entries)
        CHECK((e.provenance == Provenance::AgentDefault));
    CHECK(r.ledger.configHash == r.config->contentHash());
    const auto* relperm = r.ledger.find("relperm_family_and_params");
    REQUIRE(relperm);
    CHECK(relperm->value["/fluids/relperm"]["family"] == "brooks_corey");
    CHECK(r.config->fluid.relperm.residual[0] == 0.2);
    CHECK(r.config->fluid.density.referencePressure == r.config->initialPressure);
    CHECK(r.config->wells.injectors.size() == 4);
    CHECK(r.config->wells.producers.size() == 3);
    CHECK(r.config->wells.producers[0].i == 10);
    CHECK(r.config->schedule.reportTimes.size() == 40);
    CHECK(r.config->schedule.totalTime == 10.0 * kYear365);

    auto full = resolve(parseSpecJson(r.config->toJson()));
    for (const auto& e: full.ledger.entries)
        CHECK((e.provenance == Provenance::UserExplicit));
    CHECK(full.ledger.configHash == r.ledger.configHash);
}

TEST_CASE("randomized omission still resolves")
{
    auto complete = defaultConfig().toJson();
    auto flat = complete.flatten();
    auto leaves = std::vector<std::string> {};
    for (const auto& [pointer, value]: flat.items())
    {
        // record fields of array elements are required by the schema, so
        // arrays are dropped whole
        auto p = pointer;
        for (auto pos = p.find('/', 1); pos != std::string::npos; pos = p.find('/', pos + 1))
            if (pos + 1 < p.size() && std::isdigit(static_cast<unsigned char>(p[pos + 1])))
            {
                p = p.substr(0, pos);
                break;
            }
        if (std::find(leaves.begin(), leaves.end(), p) == leaves.end())
            leaves.push_back(p);
        auto parent = p.substr(0, p.rfind('/'));
        if (parent.rfind('/') != 0 && std::find(leaves.begin(), leaves.end(), parent) == leaves.end())
            leaves.push_back(parent);
    }
    auto rng = std::mt19937 {7};
    for (int trial = 0; trial < 60; ++trial)
    {
        auto doc = complete;
        auto removed = std::vector<std::string> {};
        for (const auto& leaf: leaves)
            if (std::bernoulli_distribution(0.25)(rng))
            {
                auto ptr = Json::json_pointer(leaf);
                if (doc.contains(ptr))
                {
                    doc[ptr.parent_pointer()].erase(ptr.back());
                    removed.push_back(leaf);
                }
            }
        auto spec = parseSpecJson(doc);
        auto r = resolve(spec);
        REQUIRE(r.config);
        CHECK(r.ledger.entries.size() == checklist().items.size());
        CHECK(r.config->contentHash() == r.ledger.configHash);

        auto intact = [&](const std::string& p) {
            return complete.contains(Json::json_pointer(p)) &&
                   std::none_of(removed.begin(), removed.end(), [&](const auto& r) {
                       return r == p || r.rfind(p + "/", 0) == 0 || p.rfind(r + "/", 0) == 0;
                   });
        };
        for (const auto& e: r.ledger.entries)
        {
            const auto& item = checklist().item(e.key);
            auto stated = std::all_of(item.paths.begin(), item.paths.end(), intact);
            for (const auto& group: item.alternatives)
                stated = stated && std::any_of(group.begin(), group.end(), intact);
            CHECK_MESSAGE(((e.provenance == Provenance::UserExplicit) == stated), e.key);
        }
    }
}

TEST_CASE("partially stated item keeps its values")
{
    auto r = resolve(parseSpec(R"({"solver": {"initial_dt": {"value": 2, "unit": "day"}}})"));
    CHECK(r.config->solver.initialDt == 172800.0);
    CHECK(r.config->solver.maxDt == sim::SolverControls {}.maxDt);
    const auto* e = r.ledger.find("solver_controls");
    REQUIRE(e);
    CHECK((e->provenance == Provenance::AgentDefault));
    CHECK(e->rationale.find("/solver/max_dt") != std::string::npos);
    CHECK(e->rationale.find("/solver/initial_dt") == std::string::npos);
}

TEST_CASE("interactive clarification and answers")
{
    auto spec = parseSpec(R"({"meta": {"level": "report"}})");
    auto policy = ResolvePolicy {};
    policy.kind = PolicyKind::Interactive;
    auto first = resolve(spec, policy);
    REQUIRE(first.needsAnswers());
    CHECK_FALSE(first.config);
    const auto& items = first.clarification->items;
    auto porosity = std::find_if(items.begin(), items.end(), [](const auto& i) { return i.key == "porosity_spec"; });
    REQUIRE(porosity != items.end());
    CHECK(porosity->proposedDefault["/layers/porosity"]["kind"] == "constant");

    policy.answers["porosity_spec"] = Json::parse(R"({"kind": "lognormal",
        "units": [{"mean": 0.18, "std": 0.02}, {"mean": 0.20, "std": 0.02}, {"mean": 0.22, "std": 0.02}]})");
    auto second = resolve(spec, policy);
    REQUIRE(second.config);
    const auto* e = second.ledger.find("porosity_spec");
    REQUIRE(e);
    CHECK((e->provenance == Provenance::UserExplicit));
    CHECK(e->value["/layers/porosity"]["kind"] == "lognormal");
    CHECK(second.config->layers[2].porosity.mean == 0.22);
    CHECK_FALSE(second.config->porosityConstant);
    CHECK((second.ledger.find("density_closure")->provenance == Provenance::AgentDefault));

    policy.answers["porosity_spec"] = Json::parse(R"({"kind": "constant", "value": 1.5})");
    try
    {
        resolve(spec, policy);
        FAIL("expected invariant violation");
    }
    catch (const Error& err)
    {
        CHECK(err.kind() == ErrorKind::InvariantViolation);
        CHECK(err.detail().find("porosity-fraction") != std::string::npos);
    }

    auto multi = answerPaths("initial_state", Json::parse(R"({"pressure": {"value": 200, "unit": "bar"}, "sw": 0.1})"));
    CHECK(multi.at("/initial/pressure") == 2e7);
    CHECK(multi.at("/initial/sw") == 0.1);
    CHECK(answerPaths("sampling_seed", 9).at("/sampling/seed") == 9);
    CHECK_THROWS_AS(answerPaths("initial_state", Json::parse(R"({"colour": 1})")), Error);
    CHECK_THROWS_AS(answerPaths("no_such_key", 1), Error);
}

TEST_CASE("injection rate and target pore volumes must agree")
{
    auto doc = defaultConfig().toJson();
    doc["wells"]["injectors"] = Json::parse(R"([{"name": "I1", "i": 0, "j": 0}])");
    auto pv = pipeline::configPoreVolume(configFromDocument(doc));
    auto total = doc["schedule"]["total_time"].get<double>();
    doc["wells"]["injection_rate"] = pv / total;
    auto ok = resolve(parseSpecJson(doc));
    CHECK(ok.config->wells.injection == InjectionMode::Explicit);
    doc["wells"]["injection_rate"] = 2.0 * pv / total;
    try
    {
        resolve(parseSpecJson(doc));
        FAIL("expected contradiction");
    }
    catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::Contradiction);
        CHECK(e.detail() == "/wells/injection_rate vs /schedule/target_pvi");
    }
    doc["schedule"].erase("target_pvi");
    CHECK(resolve(parseSpecJson(doc)).config->wells.injectionRate == 2.0 * pv / total);
}

TEST_CASE("canonical serialization")
{
    auto config = defaultConfig();
    auto form = canonicalSerialize(config);
    CHECK(form.hash.size() == 64);
    CHECK(form.document == config.canonical());
    CHECK(form.document.find('\n') == std::string::npos);
    CHECK(form.document.find("\"constraints\"") < form.document.find("\"deformation\""));

    auto again = resolve(parseSpec(form.document));
    CHECK(canonicalSerialize(*again.config).document == form.document);
    CHECK(canonicalSerialize(*again.config).hash == form.hash);

    auto lognormal = resolve(parseSpec(R"({"layers": {"porosity": {"kind": "lognormal",
        "units": [{"mean": 0.18, "std": 0.02}, {"mean": 0.2, "std": 0.02}, {"mean": 0.22, "std": 0.02}]}},
        "wells": {"completion": [1, 4], "injectors": [{"name": "INJ", "i": 3, "j": 4}]},
        "schedule": {"report_steps": 5}})"));
    auto text = lognormal.config->canonical();
    CHECK(resolve(parseSpec(text)).config->canonical() == text);

    auto other = config;
    other.sampling.seed = 43;
    CHECK(other.contentHash() != config.contentHash());
    CHECK(config.checklistValue("sampling_seed")["/sampling/seed"] == 42);
}

TEST_CASE("ledger export round trip")
{
    auto r = resolve(ModelSpec {});
    auto j = r.ledger.toJson();
    auto back = AssumptionLedger::fromJson(j);
    CHECK(back.toJson() == j);
    CHECK(j["entries"][0]["provenance"] == "AgentDefault");
    CHECK(j["entries"][0].contains("event_id"));
    CHECK_THROWS_AS(AssumptionLedger::fromJson(Json::parse(R"({"entries": [{"key": 1}]})")), Error);
}

TEST_CASE("defaults audit")
{
    auto spec = parseSpec(R"({"fluids": {"viscosity": [5e-4, 5e-3], "density": [1000, 850]}})");
    auto [legacy, ledger] = legacyBuild(spec);
    CHECK(ledger.entries.size() == 2);
    CHECK(legacy.fluid.density.kind == fluid::DensityKind::ConstantCompressibility);
    CHECK(legacy.fluid.density.referencePressure == 1e5);

    auto report = defaultsAudit(legacy, ledger);
    CHECK(report.contains("density_closure"));
    CHECK(report.entries.size() == checklist().items.size() - 2);
    for (const auto& e: report.entries)
        CHECK((e.provenance == Provenance::SimulatorDefault));
    CHECK(ledger.entries.size() == checklist().items.size());
    CHECK(defaultsAudit(legacy, ledger).empty());

    auto resolved = resolve(spec);
    auto total = resolved.ledger;
    CHECK(defaultsAudit(*resolved.config, total).empty());

    auto changed = legacy;
    changed.initialSw = 0.3;
    CHECK(errorOf([&] { defaultsAudit(changed, ledger); }) == ErrorKind::StaleLedger);
}

TEST_CASE("static checks")
{
    auto config = defaultConfig();
    for (const auto& f: staticCheck(config))
        CHECK(f.severity != "error");

    auto bad = config;
    bad.layers[1].porosity.mean = 1.5;
    bad.porosityConstant = false;
    auto findings = staticCheck(bad);
    auto it = std::find_if(findings.begin(), findings.end(), [](const auto& f) { return f.severity == "error"; });
    REQUIRE(it != findings.end());
    CHECK(it->invariant == "porosity-fraction");
    CHECK(it->key == "porosity_spec");

    auto slow = config;
    slow.solver.initialDt = 2.0 * slow.schedule.totalTime;
    findings = staticCheck(slow);
    CHECK(std::any_of(findings.begin(), findings.end(),
                      [](const auto& f) { return f.invariant == "initial-step" && f.severity == "warning"; }));

    auto tight = config;
    tight.layers[0].permeability.mean = 1e5 * petro::kDarcy;
    findings = staticCheck(tight);
    CHECK(std::any_of(findings.begin(), findings.end(),
                      [](const auto& f) { return f.invariant == "permeability-magnitude"; }));

    auto outside = config;
    outside.wells.producers[0].i = 99;
    findings = staticCheck(outside);
    CHECK(std::any_of(findings.begin(), findings.end(), [](const auto& f) { return f.invariant == "well-location"; }));
}
