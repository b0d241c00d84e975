// SPDX-License-Identifier: Apache-2.0
#include <groundloop/audit.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace groundloop::audit
{

namespace
{

bool hasPointer(const Json& doc, const std::string& pointer)
{
    return doc.contains(Json::json_pointer(pointer));
}

void erasePointer(Json& doc, const std::string& pointer)
{
    auto ptr = Json::json_pointer(pointer);
    if (!doc.contains(ptr))
        return;
    auto& parent = doc.at(ptr.parent_pointer());
    if (parent.is_object())
        parent.erase(ptr.back());
    else if (parent.is_array())
        parent.erase(static_cast<std::size_t>(std::stoul(ptr.back())));
}

void dropEmptyBlocks(Json& doc)
{
    for (auto it = doc.begin(); it != doc.end();)
        it = (it->is_object() && it->empty()) ? doc.erase(it) : std::next(it);
}

double relDelta(double reference, double candidate)
{
    auto scale = std::max(std::abs(reference), std::abs(candidate));
    return scale > 0.0 ? std::abs(candidate - reference) / scale : 0.0;
}

Json valueAt(const Json& doc, const spec::ChecklistItem& item)
{
    auto out = Json::object();
    for (const auto& p: item.valuePaths)
        if (hasPointer(doc, p))
            out[p] = doc.at(Json::json_pointer(p));
    return out;
}

std::optional<Attribution> attributionFor(const spec::AssumptionLedger& ledger, const std::string& key,
                                          const Json& candidateValue)
{
    const auto* entry = ledger.find(key);
    if (!entry || !sameValue(entry->value, candidateValue, 0.0))
        return std::nullopt;
    return Attribution {key, entry->provenance, entry->value, entry->rationale, entry->eventId};
}

std::vector<KeyDiff> keyDiffs(const Subject& reference, const Subject& candidate, double rel)
{
    auto refDoc = reference.run.config.toJson();
    auto candDoc = candidate.run.config.toJson();
    auto out = std::vector<KeyDiff> {};
    for (const auto& item: spec::checklist().items)
    {
        auto d = KeyDiff {};
        d.key = item.key;
        d.category = item.category;
        d.reference = valueAt(refDoc, item);
        d.candidate = valueAt(candDoc, item);
        if (d.reference.empty() && d.candidate.empty())
            d.status = DiffStatus::Equal;
        else if (d.candidate.empty())
            d.status = DiffStatus::OnlyReference;
        else if (d.reference.empty())
            d.status = DiffStatus::OnlyCandidate;
        else
        {
            for (const auto& p: item.valuePaths)
            {
                auto inRef = d.reference.contains(p);
                auto inCand = d.candidate.contains(p);
                if (inRef != inCand || (inRef && !sameValue(d.reference[p], d.candidate[p], rel)))
                    d.paths.push_back(p);
            }
            d.status = d.paths.empty() ? DiffStatus::Equal : DiffStatus::Differs;
        }
        if (d.status != DiffStatus::Equal)
            d.attribution = attributionFor(candidate.ledger, item.key, d.candidate);
        out.push_back(std::move(d));
    }
    return out;
}

GeometryDiff geometryDiff(const Subject& reference, const Subject& candidate, const std::vector<KeyDiff>& keys,
                          double rel)
{
    const auto& a = reference.run;
    const auto& b = candidate.run;
    auto g = GeometryDiff {};
    g.referencePoreVolume = a.result.poreVolume;
    g.candidatePoreVolume = b.result.poreVolume;
    g.poreVolumeDeltaRel = relDelta(g.referencePoreVolume, g.candidatePoreVolume);
    g.referenceBulkVolume = a.built.bulkVolume;
    g.candidateBulkVolume = b.built.bulkVolume;
    g.bulkVolumeDeltaRel = relDelta(g.referenceBulkVolume, g.candidateBulkVolume);

    const auto& ma = a.built.model.mesh;
    const auto& mb = b.built.model.mesh;
    g.sameTopology = ma.dims.nx == mb.dims.nx && ma.dims.ny == mb.dims.ny && ma.dims.nz == mb.dims.nz &&
                     ma.nodes.size() == mb.nodes.size();
    if (g.sameTopology && !ma.nodes.empty())
    {
        auto sum = 0.0;
        for (std::size_t n = 0; n < ma.nodes.size(); ++n)
        {
            auto d = mesh::norm(mb.nodes[n] - ma.nodes[n]);
            g.nodeDisplacementMax = std::max(g.nodeDisplacementMax, d);
            sum += d;
        }
        g.nodeDisplacementMean = sum / static_cast<double>(ma.nodes.size());
    }
    auto lengthScale = std::max({ma.dims.lx, ma.dims.ly, ma.dims.lz});
    g.differs = !g.sameTopology || g.poreVolumeDeltaRel > rel || g.bulkVolumeDeltaRel > rel ||
                g.nodeDisplacementMax > rel * lengthScale;
    for (const auto& k: keys)
        if (k.category == spec::Category::Geometry && k.status != DiffStatus::Equal && k.attribution)
            g.attributions.push_back(*k.attribution);
    return g;
}

struct Moments
{
    double mean = 0.0;
    double std = 0.0;
};

std::vector<Moments> unitMoments(const mesh::Mesh& mesh, const std::vector<double>& values)
{
    auto units = static_cast<std::size_t>(std::max(1, mesh.unitCount));
    auto sum = std::vector<double>(units, 0.0);
    auto sq = std::vector<double>(units, 0.0);
    auto count = std::vector<double>(units, 0.0);
    for (std::size_t c = 0; c < values.size() && c < mesh.layerOfCell.size(); ++c)
    {
        auto u = static_cast<std::size_t>(mesh.layerOfCell[c]);
        if (u >= units)
            continue;
        sum[u] += values[c];
        count[u] += 1.0;
    }
    auto out = std::vector<Moments>(units);
    for (std::size_t u = 0; u < units; ++u)
        out[u].mean = count[u] > 0.0 ? sum[u] / count[u] : 0.0;
    for (std::size_t c = 0; c < values.size() && c < mesh.layerOfCell.size(); ++c)
    {
        auto u = static_cast<std::size_t>(mesh.layerOfCell[c]);
        if (u < units)
            sq[u] += (values[c] - out[u].mean) * (values[c] - out[u].mean);
    }
    for (std::size_t u = 0; u < units; ++u)
        out[u].std = count[u] > 0.0 ? std::sqrt(sq[u] / count[u]) : 0.0;
    return out;
}

MomentDiff momentDiff(const Moments& a, const Moments& b)
{
    return {a.mean, b.mean, a.std, b.std, relDelta(a.mean, b.mean), relDelta(a.std, b.std)};
}

FieldDiff fieldDiff(const Subject& reference, const Subject& candidate, double rel)
{
    const auto& a = reference.run.built.model;
    const auto& b = candidate.run.built.model;
    auto f = FieldDiff {};
    f.permeabilityHashEqual = a.permeability.contentHash() == b.permeability.contentHash();
    f.porosityHashEqual = a.porosity.contentHash() == b.porosity.contentHash();
    auto pa = unitMoments(a.mesh, a.permeability.values);
    auto pb = unitMoments(b.mesh, b.permeability.values);
    auto qa = unitMoments(a.mesh, a.porosity.values);
    auto qb = unitMoments(b.mesh, b.porosity.values);
    f.statsDiffer = pa.size() != pb.size();
    for (std::size_t u = 0; u < std::min(pa.size(), pb.size()); ++u)
    {
        auto d = UnitFieldDiff {};
        d.unit = static_cast<int>(u);
        d.permeability = momentDiff(pa[u], pb[u]);
        d.porosity = momentDiff(qa[u], qb[u]);
        d.differs = d.permeability.meanDeltaRel > rel || d.permeability.stdDeltaRel > rel ||
                    d.porosity.meanDeltaRel > rel || d.porosity.stdDeltaRel > rel;
        f.statsDiffer = f.statsDiffer || d.differs;
        f.units.push_back(d);
    }
    return f;
}

std::map<std::string, std::pair<int, int>> wellCells(const spec::WellsConfig& w)
{
    auto out = std::map<std::string, std::pair<int, int>> {};
    for (const auto* list: {&w.injectors, &w.producers})
        for (const auto& s: *list)
            out[s.name] = {s.i, s.j};
    return out;
}

WellDiff wellDiff(const Subject& reference, const Subject& candidate, double rel)
{
    const auto& ca = reference.run.config;
    const auto& cb = candidate.run.config;
    auto w = WellDiff {};
    auto a = wellCells(ca.wells);
    auto b = wellCells(cb.wells);
    auto names = std::vector<std::string> {};
    for (const auto& [name, _]: a)
        names.push_back(name);
    for (const auto& [name, _]: b)
        if (!a.count(name))
            names.push_back(name);
    std::sort(names.begin(), names.end());
    for (const auto& name: names)
    {
        auto p = WellPlacementDiff {};
        p.name = name;
        if (a.count(name))
            p.reference = a[name];
        if (b.count(name))
            p.candidate = b[name];
        if (p.reference && p.candidate)
        {
            auto centre = [](const spec::ExecutableConfig& c, std::pair<int, int> ij) {
                return std::pair {(ij.first + 0.5) * c.dims.dx(), (ij.second + 0.5) * c.dims.dy()};
            };
            auto [xa, ya] = centre(ca, *p.reference);
            auto [xb, yb] = centre(cb, *p.candidate);
            p.distance = std::hypot(xb - xa, yb - ya);
        }
        w.differs = w.differs || !p.reference || !p.candidate || p.distance > 0.0;
        w.placements.push_back(p);
    }
    w.producerBhpDelta = cb.wells.producerBhp - ca.wells.producerBhp;
    w.injectionRateDelta = candidate.run.built.injectionRate - reference.run.built.injectionRate;
    w.radiusDelta = cb.wells.radius - ca.wells.radius;
    w.skinDelta = cb.wells.skin - ca.wells.skin;
    w.differs = w.differs || relDelta(ca.wells.producerBhp, cb.wells.producerBhp) > rel ||
                relDelta(reference.run.built.injectionRate, candidate.run.built.injectionRate) > rel ||
                relDelta(ca.wells.radius, cb.wells.radius) > rel || std::abs(w.skinDelta) > rel;
    return w;
}

double finalPvi(const sim::RunResult& r)
{
    if (r.diagnostics.accepted.empty() || r.poreVolume <= 0.0)
        return 0.0;
    return r.diagnostics.accepted.back().cumulativeInjection / r.poreVolume;
}

struct Curve
{
    std::vector<double> x;
    std::vector<double> y;

    [[nodiscard]] double at(double v) const
    {
        if (x.empty())
            return 0.0;
        if (v <= x.front())
            return y.front();
        if (v >= x.back())
            return y.back();
        auto it = std::upper_bound(x.begin(), x.end(), v);
        auto k = static_cast<std::size_t>(it - x.begin());
        auto t = (v - x[k - 1]) / (x[k] - x[k - 1]);
        return y[k - 1] + t * (y[k] - y[k - 1]);
    }
};

/// Producer water and oil rates per unit injected volume, placed at the PVI
/// midpoint of each accepted step, and the average pressure at step ends.
struct Responses
{
    Curve water;
    Curve oil;
    Curve pressure;
};

Responses responses(const sim::RunResult& r)
{
    auto out = Responses {};
    out.pressure.x.push_back(0.0);
    out.pressure.y.push_back(r.initialAveragePressure);
    auto previous = 0.0;
    for (const auto& s: r.diagnostics.accepted)
    {
        auto pvi = s.cumulativeInjection / r.poreVolume;
        auto injected = 0.0;
        auto water = 0.0;
        auto oil = 0.0;
        for (std::size_t w = 0; w < s.wells.size(); ++w)
        {
            if (r.wellKinds[w] == wells::WellKind::Producer)
            {
                water -= s.wells[w].water;
                oil -= s.wells[w].oil;
            }
            else
                injected += s.wells[w].water + s.wells[w].oil;
        }
        auto mid = 0.5 * (previous + pvi);
        if (pvi > previous && (out.water.x.empty() || mid > out.water.x.back()))
        {
            out.water.x.push_back(mid);
            out.water.y.push_back(injected > 0.0 ? water / injected : 0.0);
            out.oil.x.push_back(mid);
            out.oil.y.push_back(injected > 0.0 ? oil / injected : 0.0);
        }
        if (pvi > out.pressure.x.back())
        {
            out.pressure.x.push_back(pvi);
            out.pressure.y.push_back(s.averagePressure);
        }
        previous = pvi;
    }
    return out;
}

constexpr int kGridPoints = 100;

ResponseDiff responseDiff(const Subject& reference, const Subject& candidate, const std::vector<double>& fractions,
                          const Tolerances& tol)
{
    const auto& ra = reference.run.result;
    const auto& rb = candidate.run.result;
    auto pmax = std::min(finalPvi(ra), finalPvi(rb));
    for (auto f: fractions)
        if (!(f > 0.0) || f > pmax * (1.0 + 1e-9))
            throw Error(ErrorKind::OutOfRange, "PVI fraction beyond the achieved injection of a run",
                        std::to_string(f) + " > " + std::to_string(pmax));

    auto out = ResponseDiff {};
    auto a = responses(ra);
    auto b = responses(rb);
    auto rateNum = 0.0;
    auto rateDen = 0.0;
    auto pNum = 0.0;
    auto pDen = 0.0;
    for (int k = 1; k <= kGridPoints; ++k)
    {
        auto g = pmax * k / kGridPoints;
        out.pviGrid.push_back(g);
        out.referenceWater.push_back(a.water.at(g));
        out.candidateWater.push_back(b.water.at(g));
        out.referenceOil.push_back(a.oil.at(g));
        out.candidateOil.push_back(b.oil.at(g));
        out.referencePressure.push_back(a.pressure.at(g));
        out.candidatePressure.push_back(b.pressure.at(g));

        auto dw = std::abs(out.candidateWater.back() - out.referenceWater.back());
        auto doil = std::abs(out.candidateOil.back() - out.referenceOil.back());
        rateNum += dw + doil;
        rateDen += std::abs(out.referenceWater.back()) + std::abs(out.referenceOil.back());
        out.rateLinf = std::max({out.rateLinf, dw, doil});

        auto dp = std::abs(out.candidatePressure.back() - out.referencePressure.back());
        auto pref = std::abs(out.referencePressure.back());
        pNum += dp;
        pDen += pref;
        if (pref > 0.0)
            out.pressureDeltaRel = std::max(out.pressureDeltaRel, dp / pref);
    }
    out.rateL1 = rateDen > 0.0 ? rateNum / rateDen : rateNum;
    out.pressureL1 = pDen > 0.0 ? pNum / pDen : pNum;

    const auto& pv = reference.run.built.model.poreVolumes;
    auto pvTotal = 0.0;
    for (auto v: pv)
        pvTotal += v;
    for (auto f: fractions)
    {
        auto clamped = std::min(f, pmax);
        auto sa = sim::pviSeries(ra, ra.poreVolume, {std::min(clamped, finalPvi(ra))}).front();
        auto sb = sim::pviSeries(rb, rb.poreVolume, {std::min(clamped, finalPvi(rb))}).front();
        auto s = SaturationSample {f, sa.snapshotPvi, sb.snapshotPvi, std::nullopt};
        const auto& swa = ra.snapshots[sa.reportIndex].sw;
        const auto& swb = rb.snapshots[sb.reportIndex].sw;
        if (swa.size() == swb.size() && swa.size() == pv.size() && pvTotal > 0.0)
        {
            auto sum = 0.0;
            for (std::size_t c = 0; c < swa.size(); ++c)
                sum += std::abs(swb[c] - swa[c]) * pv[c];
            s.l1 = sum / pvTotal;
            out.saturationL1 = std::max(out.saturationL1, *s.l1);
        }
        out.saturation.push_back(s);
    }
    out.ratesDiffer = out.rateL1 > tol.rateL1;
    out.pressureDiffers = out.pressureDeltaRel > tol.pressureRel;
    out.saturationDiffers = out.saturationL1 > tol.saturationL1;
    for (const auto& s: out.saturation)
        out.saturationDiffers = out.saturationDiffers || !s.l1;
    return out;
}

Json attributionJson(const Attribution& a)
{
    return {{"key", a.key},
            {"provenance", spec::toString(a.provenance)},
            {"value", a.value},
            {"rationale", a.rationale},
            {"event_id", a.eventId}};
}

Json momentJson(const MomentDiff& m)
{
    return {{"reference_mean", m.referenceMean}, {"candidate_mean", m.candidateMean},
            {"reference_std", m.referenceStd},   {"candidate_std", m.candidateStd},
            {"mean_delta_rel", m.meanDeltaRel},  {"std_delta_rel", m.stdDeltaRel}};
}

Json cellJson(const std::optional<std::pair<int, int>>& ij)
{
    if (!ij)
        return nullptr;
    return Json::array({ij->first, ij->second});
}

std::string fmt(double v)
{
    auto s = std::ostringstream {};
    s << std::setprecision(6) << v;
    return s.str();
}

} // namespace

LevelMask LevelMask::forLevel(spec::Level level)
{
    auto m = LevelMask {};
    m.level = level;
    if (level == spec::Level::Reproduction)
        return m;
    m.removed = {"/meta/seed", "/sampling", "/solver"};
    if (level == spec::Level::Journal)
    {
        m.removed.insert(m.removed.end(), {"/deformation/undulation_wavelength", "/deformation/dome_radius",
                                           "/deformation/interface_depths", "/fluids/density_closure"});
        m.coarsened = {"/wells/producers"};
    }
    return m;
}

Json LevelMask::toJson() const
{
    return {{"level", spec::toString(level)}, {"removed", removed}, {"coarsened", coarsened}};
}

std::vector<LevelMask> standardMasks()
{
    return {LevelMask::forLevel(spec::Level::Reproduction), LevelMask::forLevel(spec::Level::Report),
            LevelMask::forLevel(spec::Level::Journal)};
}

spec::ModelSpec degrade(const spec::ModelSpec& spec, const LevelMask& mask)
{
    auto out = spec;
    for (const auto& p: mask.removed)
        erasePointer(out.doc, p);
    for (const auto& p: mask.coarsened)
    {
        if (!hasPointer(out.doc, p))
            continue;
        if (p == "/wells/producers")
        {
            auto count = out.doc["wells"]["producers"].size();
            erasePointer(out.doc, p);
            out.doc["wells"]["producer_count"] = count;
            out.doc["wells"]["producer_placement"] = "interior";
        }
        else
            erasePointer(out.doc, p);
    }
    if (static_cast<int>(mask.level) > static_cast<int>(out.level))
        out.level = mask.level;
    out.doc["meta"]["level"] = spec::toString(out.level);
    dropEmptyBlocks(out.doc);
    spec::enforceLevelMask(out);
    return out;
}

Reconstruction reconstruct(const spec::ModelSpec& degraded, const spec::ResolvePolicy& policy)
{
    auto resolution = spec::resolve(degraded, policy);
    if (!resolution.config)
    {
        auto keys = std::string {};
        if (resolution.clarification)
            for (const auto& item: resolution.clarification->items)
                keys += (keys.empty() ? "" : ",") + item.key;
        throw Error(ErrorKind::Query, "reconstruction needs answers for open items", keys);
    }
    return {*resolution.config, resolution.ledger};
}

Subject runSubject(const Reconstruction& reconstruction)
{
    return {reconstruction.ledger, pipeline::run(reconstruction.config)};
}

bool sameValue(const Json& a, const Json& b, double rel)
{
    if (a.is_number() && b.is_number())
    {
        auto x = a.get<double>();
        auto y = b.get<double>();
        return x == y || std::abs(x - y) <= rel * std::max(std::abs(x), std::abs(y));
    }
    if (a.is_array() && b.is_array())
    {
        if (a.size() != b.size())
            return false;
        for (std::size_t n = 0; n < a.size(); ++n)
            if (!sameValue(a[n], b[n], rel))
                return false;
        return true;
    }
    if (a.is_object() && b.is_object())
    {
        if (a.size() != b.size())
            return false;
        for (auto it = a.begin(); it != a.end(); ++it)
            if (!b.contains(it.key()) || !sameValue(it.value(), b[it.key()], rel))
                return false;
        return true;
    }
    return a == b;
}

const char* toString(DiffStatus s)
{
    switch (s)
    {
        case DiffStatus::Equal: return "equal";
        case DiffStatus::Differs: return "differs";
        case DiffStatus::OnlyReference: return "only_reference";
        case DiffStatus::OnlyCandidate: return "only_candidate";
    }
    return "equal";
}

std::vector<std::string> DiffReport::differingKeys() const
{
    auto out = std::vector<std::string> {};
    for (const auto& k: keys)
        if (k.status != DiffStatus::Equal)
            out.push_back(k.key);
    return out;
}

std::vector<const KeyDiff*> DiffReport::closureDiffs() const
{
    auto out = std::vector<const KeyDiff*> {};
    for (const auto& k: keys)
        if (k.category == spec::Category::Closure && k.status != DiffStatus::Equal)
            out.push_back(&k);
    return out;
}

const KeyDiff& DiffReport::key(const std::string& name) const
{
    for (const auto& k: keys)
        if (k.key == name)
            return k;
    throw Error(ErrorKind::Query, "unknown checklist key '" + name + "'", name);
}

bool DiffReport::allEqual() const
{
    return differingKeys().empty() && !geometry.differs && fields.permeabilityHashEqual &&
           fields.porosityHashEqual && !fields.statsDiffer && !wells.differs && !responses.ratesDiffer &&
           !responses.pressureDiffers && !responses.saturationDiffers;
}

Json DiffReport::toJson() const
{
    auto j = Json::object();
    j["format"] = "groundloop-diff/1";
    j["reference_hash"] = referenceHash;
    j["candidate_hash"] = candidateHash;
    j["pvi_fractions"] = pviFractions;
    j["tolerances"] = {{"scalar_rel", tolerances.scalarRel},
                       {"stats_rel", tolerances.statsRel},
                       {"rate_l1", tolerances.rateL1},
                       {"pressure_rel", tolerances.pressureRel},
                       {"saturation_l1", tolerances.saturationL1}};

    auto ks = Json::array();
    for (const auto& k: keys)
    {
        auto e = Json {{"key", k.key}, {"category", spec::toString(k.category)}, {"status", toString(k.status)}};
        if (k.status != DiffStatus::Equal)
        {
            e["reference"] = k.reference.empty() ? Json(nullptr) : k.reference;
            e["candidate"] = k.candidate.empty() ? Json(nullptr) : k.candidate;
            e["paths"] = k.paths;
            e["attribution"] = k.attribution ? attributionJson(*k.attribution) : Json(nullptr);
        }
        ks.push_back(e);
    }
    j["keys"] = ks;
    j["differing_keys"] = differingKeys();

    auto geo = Json {{"reference_pore_volume", geometry.referencePoreVolume},
                     {"candidate_pore_volume", geometry.candidatePoreVolume},
                     {"pore_volume_delta_rel", geometry.poreVolumeDeltaRel},
                     {"reference_bulk_volume", geometry.referenceBulkVolume},
                     {"candidate_bulk_volume", geometry.candidateBulkVolume},
                     {"bulk_volume_delta_rel", geometry.bulkVolumeDeltaRel},
                     {"same_topology", geometry.sameTopology},
                     {"node_displacement_max", geometry.nodeDisplacementMax},
                     {"node_displacement_mean", geometry.nodeDisplacementMean},
                     {"differs", geometry.differs}};
    geo["attributions"] = Json::array();
    for (const auto& a: geometry.attributions)
        geo["attributions"].push_back(attributionJson(a));
    j["geometry"] = geo;

    auto units = Json::array();
    for (const auto& u: fields.units)
        units.push_back({{"unit", u.unit},
                         {"permeability", momentJson(u.permeability)},
                         {"porosity", momentJson(u.porosity)},
                         {"differs", u.differs}});
    j["fields"] = {{"permeability_hash_equal", fields.permeabilityHashEqual},
                   {"porosity_hash_equal", fields.porosityHashEqual},
                   {"units", units},
                   {"stats_differ", fields.statsDiffer}};

    auto placements = Json::array();
    for (const auto& p: wells.placements)
        placements.push_back({{"name", p.name},
                              {"reference", cellJson(p.reference)},
                              {"candidate", cellJson(p.candidate)},
                              {"distance", p.distance}});
    j["wells"] = {{"placements", placements},
                  {"producer_bhp_delta", wells.producerBhpDelta},
                  {"injection_rate_delta", wells.injectionRateDelta},
                  {"radius_delta", wells.radiusDelta},
                  {"skin_delta", wells.skinDelta},
                  {"differs", wells.differs}};

    auto sat = Json::array();
    for (const auto& s: responses.saturation)
        sat.push_back({{"fraction", s.fraction},
                       {"reference_snapshot_pvi", s.referenceSnapshotPvi},
                       {"candidate_snapshot_pvi", s.candidateSnapshotPvi},
                       {"l1", s.l1 ? Json(*s.l1) : Json(nullptr)}});
    j["responses"] = {{"pvi", responses.pviGrid},
                      {"reference_water", responses.referenceWater},
                      {"candidate_water", responses.candidateWater},
                      {"reference_oil", responses.referenceOil},
                      {"candidate_oil", responses.candidateOil},
                      {"reference_pressure", responses.referencePressure},
                      {"candidate_pressure", responses.candidatePressure},
                      {"rate_l1", responses.rateL1},
                      {"rate_linf", responses.rateLinf},
                      {"pressure_delta_rel", responses.pressureDeltaRel},
                      {"pressure_l1", responses.pressureL1},
                      {"saturation", sat},
                      {"saturation_l1", responses.saturationL1},
                      {"rates_differ", responses.ratesDiffer},
                      {"pressure_differs", responses.pressureDiffers},
                      {"saturation_differs", responses.saturationDiffers}};
    j["all_equal"] = allEqual();
    return j;
}

DiffReport diff(const Subject& reference, const Subject& candidate, const std::vector<double>& pviFractions,
                const Tolerances& tolerances)
{
    if (!reference.run.result.certificate)
        throw Error(ErrorKind::RefusedDiff, "reference run has no certificate", reference.run.config.contentHash());
    if (!candidate.run.result.certificate)
        throw Error(ErrorKind::RefusedDiff, "candidate run has no certificate", candidate.run.config.contentHash());
    auto r = DiffReport {};
    r.referenceHash = reference.run.config.contentHash();
    r.candidateHash = candidate.run.config.contentHash();
    r.pviFractions = pviFractions;
    r.tolerances = tolerances;
    r.keys = keyDiffs(reference, candidate, tolerances.scalarRel);
    r.geometry = geometryDiff(reference, candidate, r.keys, tolerances.scalarRel);
    r.fields = fieldDiff(reference, candidate, tolerances.statsRel);
    r.wells = wellDiff(reference, candidate, tolerances.scalarRel);
    r.responses = responseDiff(reference, candidate, pviFractions, tolerances);
    return r;
}

const AuditRow& AuditMatrix::row(spec::Level level) const
{
    for (const auto& r: rows)
        if (r.mask.level == level)
            return r;
    throw Error(ErrorKind::Query, std::string("no audit row for level ") + spec::toString(level));
}

std::string AuditMatrix::csv() const
{
    auto out = std::ostringstream {};
    out << "level,differing_keys,pv_delta_rel,rate_L1,sat_L1\n";
    for (const auto& r: rows)
    {
        out << spec::toString(r.mask.level) << ',';
        if (r.report)
            out << r.report->differingKeys().size() << ',' << fmt(r.report->geometry.poreVolumeDeltaRel) << ','
                << fmt(r.report->responses.rateL1) << ',' << fmt(r.report->responses.saturationL1) << '\n';
        else
            out << "NA,NA,NA,NA\n";
    }
    return out.str();
}

Json AuditMatrix::toJson() const
{
    auto rs = Json::array();
    for (const auto& r: rows)
    {
        auto j = Json {{"mask", r.mask.toJson()}, {"reconstructible", r.reconstructible}};
        if (r.reconstruction)
        {
            j["config_hash"] = r.reconstruction->config.contentHash();
            j["ledger"] = r.reconstruction->ledger.toJson();
        }
        j["report"] = r.report ? r.report->toJson() : Json(nullptr);
        j["failure"] = r.failure;
        rs.push_back(j);
    }
    return {{"format", "groundloop-audit/1"}, {"reference_hash", referenceHash}, {"rows", rs}, {"summary", csv()}};
}

AuditMatrix auditMatrix(const spec::ModelSpec& reference, const std::vector<LevelMask>& masks,
                        const spec::ResolvePolicy& policy, const std::vector<double>& pviFractions)
{
    auto ref = reconstruct(reference, policy);
    auto subject = runSubject(ref);
    if (!subject.run.result.certificate)
        throw Error(ErrorKind::RefusedDiff, "reference run has no certificate", subject.run.config.contentHash());
    return auditMatrix(reference, subject, masks, policy, pviFractions);
}

AuditMatrix auditMatrix(const spec::ModelSpec& reference, const Subject& referenceRun,
                        const std::vector<LevelMask>& masks, const spec::ResolvePolicy& policy,
                        const std::vector<double>& pviFractions)
{
    auto matrix = AuditMatrix {};
    matrix.referenceHash = referenceRun.run.config.contentHash();
    for (const auto& mask: masks)
    {
        auto row = AuditRow {};
        row.mask = mask;
        try
        {
            auto recon = reconstruct(degrade(reference, mask), policy);
            row.reconstruction = recon;
            // runs are deterministic functions of the config
            auto candidate = recon.config.contentHash() == matrix.referenceHash
                                 ? Subject {recon.ledger, referenceRun.run}
                                 : runSubject(recon);
            if (!candidate.run.result.certificate)
                row.failure = pipeline::runManifest(candidate.run);
            else
            {
                row.report = diff(referenceRun, candidate, pviFractions);
                row.reconstructible = true;
            }
        }
        catch (const Error& e)
        {
            row.failure = {{"code", e.code()}, {"message", e.what()}, {"detail", e.detail()}};
        }
        matrix.rows.push_back(std::move(row));
    }
    return matrix;
}

void writeGridDump(std::ostream& out, const mesh::Mesh& mesh)
{
    out << "groundloop-grid/1\n";
    out << "dims " << mesh.dims.nx << ' ' << mesh.dims.ny << ' ' << mesh.dims.nz << ' ' << std::setprecision(17)
        << mesh.dims.lx << ' ' << mesh.dims.ly << ' ' << mesh.dims.lz << ' ' << mesh.dims.originDepth << '\n';
    out << "units " << mesh.unitCount << '\n';
    out << "nodes " << mesh.nodes.size() << '\n';
    for (const auto& n: mesh.nodes)
        out << n.x << ' ' << n.y << ' ' << n.z << '\n';
    out << "cells " << mesh.cellNodes.size() << '\n';
    for (std::size_t c = 0; c < mesh.cellNodes.size(); ++c)
    {
        out << mesh.layerOfCell[c];
        for (auto n: mesh.cellNodes[c])
            out << ' ' << n;
        out << '\n';
    }
}

mesh::Mesh readGridDump(std::istream& in)
{
    auto expect = [&](const std::string& word) {
        auto token = std::string {};
        if (!(in >> token) || token != word)
            throw Error(ErrorKind::Parse, "malformed grid dump", "expected '" + word + "'");
    };
    expect("groundloop-grid/1");
    auto m = mesh::Mesh {};
    expect("dims");
    in >> m.dims.nx >> m.dims.ny >> m.dims.nz >> m.dims.lx >> m.dims.ly >> m.dims.lz >> m.dims.originDepth;
    expect("units");
    in >> m.unitCount;
    expect("nodes");
    auto count = std::size_t {0};
    in >> count;
    m.nodes.resize(count);
    for (auto& n: m.nodes)
        in >> n.x >> n.y >> n.z;
    expect("cells");
    in >> count;
    m.cellNodes.resize(count);
    m.layerOfCell.resize(count);
    for (std::size_t c = 0; c < count; ++c)
    {
        in >> m.layerOfCell[c];
        for (auto& n: m.cellNodes[c])
            in >> n;
    }
    if (!in)
        throw Error(ErrorKind::Parse, "truncated grid dump");
    return m;
}

} // namespace groundloop::audit
