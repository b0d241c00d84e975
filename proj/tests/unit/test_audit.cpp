// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "../support/specs.hpp"

#include <groundloop/audit.hpp>

#include <algorithm>
#include <set>
#include <sstream>

using namespace groundloop;
using spec::Json;

namespace
{

/// The dome reference on an 8x8x3 grid over one year.
spec::ModelSpec smallDome()
{
    auto s = fixtures::bundledSpec("dome_reference.json");
    s.doc["mesh"]["dims"] = {8, 8, 3};
    s.doc["wells"]["producers"] = Json::parse(R"([{"name":"P1","i":4,"j":4},{"name":"P2","i":1,"j":6},
                                                  {"name":"P3","i":6,"j":1}])");
    s.doc["schedule"]["total_time"] = spec::kYear365;
    s.doc["schedule"]["report_steps"] = 4;
    return s;
}

const audit::Subject& reference()
{
    static const audit::Subject subject = audit::runSubject(audit::reconstruct(smallDome()));
    return subject;
}

audit::Subject runVariant(const spec::ModelSpec& s, const spec::ResolvePolicy& policy = {})
{
    return audit::runSubject(audit::reconstruct(s, policy));
}

std::set<std::string> keySet(const audit::DiffReport& r)
{
    auto keys = r.differingKeys();
    return {keys.begin(), keys.end()};
}

bool isSubset(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    return std::all_of(a.begin(), a.end(),
                       [&](const std::string& x) { return std::find(b.begin(), b.end(), x) != b.end(); });
}

} // namespace

TEST_CASE("level masks lose information monotonically")
{
    auto masks = audit::standardMasks();
    REQUIRE(masks.size() == 3);
    CHECK(masks[0].removed.empty());
    CHECK(isSubset(masks[0].removed, masks[1].removed));
    CHECK(isSubset(masks[1].removed, masks[2].removed));
    CHECK(isSubset(masks[1].coarsened, masks[2].coarsened));
    CHECK(masks[2].removed.size() > masks[1].removed.size());
}

TEST_CASE("degrade removes and coarsens fields")
{
    auto ref = smallDome();
    auto same = audit::degrade(ref, audit::LevelMask::forLevel(spec::Level::Reproduction));
    CHECK(same.doc == ref.doc);

    auto report = audit::degrade(ref, audit::LevelMask::forLevel(spec::Level::Report));
    CHECK((report.level == spec::Level::Report));
    CHECK_FALSE(report.has("/meta/seed"));
    CHECK_FALSE(report.has("/sampling"));
    CHECK_FALSE(report.has("/solver"));
    CHECK(report.has("/wells/producers"));
    CHECK(report.has("/fluids/density_closure"));

    auto journal = audit::degrade(ref, audit::LevelMask::forLevel(spec::Level::Journal));
    CHECK_FALSE(journal.has("/wells/producers"));
    CHECK(journal.doc["wells"]["producer_count"] == 3);
    CHECK(journal.doc["wells"]["producer_placement"] == "interior");
    CHECK_FALSE(journal.has("/deformation/dome_radius"));
    CHECK_FALSE(journal.has("/fluids/density_closure"));
    CHECK(journal.doc["deformation"]["dome_amplitude"] == 30.0);
    CHECK(journal.doc["deformation"]["undulation_amplitude"] == 2.0);

    // the degraded document is a valid spec of its level
    auto reparsed = spec::parseSpecJson(journal.doc);
    CHECK((reparsed.level == spec::Level::Journal));
    CHECK(audit::degrade(ref, audit::LevelMask::forLevel(spec::Level::Journal)).doc == journal.doc);
}

TEST_CASE("reconstruction re-defaults exactly the removed decisions")
{
    auto ref = smallDome();
    auto refConfig = audit::reconstruct(ref);
    auto identity = audit::reconstruct(audit::degrade(ref, audit::LevelMask::forLevel(spec::Level::Reproduction)));
    CHECK(identity.config.contentHash() == refConfig.config.contentHash());

    auto report = audit::reconstruct(audit::degrade(ref, audit::LevelMask::forLevel(spec::Level::Report)));
    for (const auto& key: {"sampling_seed", "sampling_strategy", "solver_controls"})
        CHECK((report.ledger.find(key)->provenance == spec::Provenance::AgentDefault));
    CHECK((report.ledger.find("density_closure")->provenance == spec::Provenance::UserExplicit));

    auto journal = audit::reconstruct(audit::degrade(ref, audit::LevelMask::forLevel(spec::Level::Journal)));
    for (const auto& key: {"producer_coordinates", "deformation_params", "density_closure"})
        CHECK((journal.ledger.find(key)->provenance == spec::Provenance::AgentDefault));
    CHECK((journal.ledger.find("deformation_amplitudes")->provenance == spec::Provenance::UserExplicit));

    auto interactive = spec::ResolvePolicy {};
    interactive.kind = spec::PolicyKind::Interactive;
    CHECK_THROWS_AS(audit::reconstruct(audit::degrade(ref, audit::LevelMask::forLevel(spec::Level::Journal)),
                                       interactive),
                    Error);
}

TEST_CASE("diff of a run with itself is all-equal")
{
    const auto& ref = reference();
    REQUIRE(ref.run.result.certificate);
    auto r = audit::diff(ref, ref);
    CHECK(r.allEqual());
    CHECK(r.differingKeys().empty());
    CHECK(r.responses.rateL1 == 0.0);
    CHECK(r.responses.pressureDeltaRel == 0.0);
    CHECK(r.responses.saturationL1 == 0.0);
    CHECK(r.geometry.nodeDisplacementMax == 0.0);
    CHECK(r.keys.size() == spec::checklist().items.size());
    auto j = r.toJson();
    CHECK(j["all_equal"] == true);
    CHECK(j["responses"]["pvi"].size() == 100);
}

TEST_CASE("diff refuses uncertified runs and unreached fractions")
{
    const auto& ref = reference();
    auto failed = ref;
    failed.run.result.certificate = false;
    try
    {
        audit::diff(ref, failed);
        FAIL("uncertified run was diffed");
    }
    catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::RefusedDiff);
    }
    try
    {
        audit::diff(ref, ref, {0.5, 1.5});
        FAIL("fraction beyond the final PVI was accepted");
    }
    catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::OutOfRange);
    }
}

TEST_CASE("closure default divergence is flagged and attributed")
{
    auto s = smallDome();
    s.doc["fluids"].erase("density_closure");
    auto policy = spec::ResolvePolicy {};
    policy.defaults.values["density_closure"] = {
        {"/fluids/density_closure", {{"kind", "incompressible"}, {"reference_pressure", 150e5}, {"compressibility", {0.0, 0.0}}}}};
    policy.defaults.rationale["density_closure"] = "zero compressibility";
    auto candidate = runVariant(s, policy);
    REQUIRE(candidate.run.result.certificate);

    auto r = audit::diff(reference(), candidate);
    const auto& k = r.key("density_closure");
    CHECK((k.status == audit::DiffStatus::Differs));
    CHECK_FALSE(k.reference.empty());
    CHECK_FALSE(k.candidate.empty());
    REQUIRE(k.attribution);
    CHECK((k.attribution->provenance == spec::Provenance::AgentDefault));
    CHECK(audit::sameValue(k.attribution->value, k.candidate, 0.0));
    CHECK(r.closureDiffs().size() == 1);
    CHECK(r.responses.pressureDeltaRel > 0.0);
    CHECK(r.fields.permeabilityHashEqual);

    // attribution soundness and symmetry of the flagged set
    for (const auto& kd: r.keys)
        if (kd.attribution)
            CHECK(audit::sameValue(kd.attribution->value, kd.candidate, 0.0));
    CHECK(keySet(audit::diff(candidate, reference())) == keySet(r));
}

TEST_CASE("sampling order changes fields but no closure")
{
    auto s = smallDome();
    s.doc["sampling"]["strategy"] = "cell_interleaved";
    auto candidate = runVariant(s);
    REQUIRE(candidate.run.result.certificate);
    auto r = audit::diff(reference(), candidate);
    CHECK(r.closureDiffs().empty());
    CHECK(r.differingKeys() == std::vector<std::string> {"sampling_strategy"});
    CHECK_FALSE(r.fields.permeabilityHashEqual);
    CHECK_FALSE(r.fields.porosityHashEqual);
    CHECK(r.geometry.bulkVolumeDeltaRel == 0.0);
    for (const auto& p: r.wells.placements)
        CHECK(p.distance == 0.0);
    CHECK(r.wells.producerBhpDelta == 0.0);
    CHECK(r.responses.rateL1 > 0.0);
}

TEST_CASE("responses are aligned by injected pore volumes, not report steps")
{
    // fine steps so both runs resolve the same physical trajectory
    auto layout = [](int steps) {
        auto s = smallDome();
        s.doc["schedule"]["report_steps"] = steps;
        s.doc["solver"]["max_dt"] = 5.0 * 86400.0;
        return runVariant(s);
    };
    auto a = layout(4);
    auto b = layout(7);
    REQUIRE(a.run.result.certificate);
    REQUIRE(b.run.result.certificate);
    auto r = audit::diff(a, b);
    CHECK(r.differingKeys() == std::vector<std::string> {"schedule"});
    CHECK(r.responses.rateL1 < 2e-3);
    CHECK(r.responses.pressureDeltaRel < 1e-3);
    CHECK_FALSE(r.responses.ratesDiffer);
    CHECK_FALSE(r.responses.pressureDiffers);
}

TEST_CASE("audit matrix grows with abstraction")
{
    auto ref = smallDome();
    auto m = audit::auditMatrix(ref, reference());
    REQUIRE(m.rows.size() == 3);
    for (const auto& row: m.rows)
        REQUIRE_MESSAGE(row.reconstructible, row.failure.dump());
    auto count = [&](spec::Level l) { return m.row(l).report->differingKeys().size(); };
    CHECK(count(spec::Level::Reproduction) == 0);
    CHECK(count(spec::Level::Reproduction) < count(spec::Level::Report));
    CHECK(count(spec::Level::Report) < count(spec::Level::Journal));
    CHECK(m.row(spec::Level::Journal).report->geometry.poreVolumeDeltaRel > 0.0);

    auto csv = m.csv();
    CHECK(csv.rfind("level,differing_keys,pv_delta_rel,rate_L1,sat_L1\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(m.toJson()["rows"].size() == 3);
}

TEST_CASE("grid dump round trip")
{
    const auto& mesh = reference().run.built.model.mesh;
    auto text = std::stringstream {};
    audit::writeGridDump(text, mesh);
    auto back = audit::readGridDump(text);
    CHECK(back.nodes == mesh.nodes);
    CHECK(back.cellNodes == mesh.cellNodes);
    CHECK(back.layerOfCell == mesh.layerOfCell);
    CHECK(back.unitCount == mesh.unitCount);

    auto bad = std::stringstream("groundloop-grid/2\n");
    CHECK_THROWS_AS(audit::readGridDump(bad), Error);
}
