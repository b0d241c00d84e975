// SPDX-License-Identifier: Apache-2.0
#include <groundloop/audit.hpp>
#include <groundloop/orchestrator.hpp>
#include <groundloop/pipeline.hpp>

#include <fstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
namespace gl = groundloop;
using Json = nlohmann::json;

namespace
{

// Documents cross the boundary as Python objects through the json module.
Json toJson(const py::handle& obj)
{
    if (py::isinstance<py::str>(obj))
        return Json::parse(obj.cast<std::string>());
    auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return Json::parse(text);
}

py::object fromJson(const Json& j)
{
    return py::module_::import("json").attr("loads")(j.dump());
}

gl::spec::ModelSpec specOf(const py::handle& doc)
{
    return gl::spec::parseSpecJson(toJson(doc));
}

gl::audit::Subject loadSubject(const std::string& dir)
{
    auto run = gl::pipeline::loadResults(dir);
    auto ledgerFile = std::filesystem::path(dir) / "ledger.json";
    auto ledger = gl::spec::AssumptionLedger {};
    if (std::filesystem::exists(ledgerFile))
    {
        auto in = std::ifstream(ledgerFile);
        ledger = gl::spec::AssumptionLedger::fromJson(Json::parse(in));
    }
    return {std::move(ledger), std::move(run)};
}

} // namespace

PYBIND11_MODULE(groundloop, m)
{
    m.doc() = "Specification-driven two-phase reservoir simulation";

    static py::exception<gl::Error> error(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try
        {
            if (p)
                std::rethrow_exception(p);
        }
        catch (const gl::Error& e)
        {
            auto inst = py::handle(error.ptr())(e.what());
            inst.attr("code") = e.code();
            inst.attr("detail") = e.detail();
            PyErr_SetObject(error.ptr(), inst.ptr());
        }
    });

    m.def(
        "parse_spec",
        [](const py::object& doc) {
            auto s = specOf(doc);
            return fromJson({{"title", s.title}, {"level", gl::spec::toString(s.level)}, {"doc", s.doc}});
        },
        py::arg("doc"), "Parse a spec document (dict or JSON text) into SI units.");

    m.def(
        "ambiguities",
        [](const py::object& doc) {
            return fromJson(gl::orch::ambiguitiesJson(gl::spec::detectAmbiguities(specOf(doc))));
        },
        py::arg("doc"));

    m.def(
        "resolve",
        [](const py::object& doc, const std::string& policy, const py::object& answers) {
            auto p = gl::spec::ResolvePolicy {};
            p.kind = gl::spec::policyFromString(policy);
            if (!answers.is_none())
            {
                auto a = toJson(answers);
                for (auto it = a.begin(); it != a.end(); ++it)
                    p.answers[it.key()] = it.value();
            }
            auto r = gl::spec::resolve(specOf(doc), p);
            if (r.needsAnswers())
                return fromJson({{"clarification", gl::orch::ambiguitiesJson(r.clarification->items)}});
            return fromJson({{"config", r.config->toJson()},
                             {"ledger", r.ledger.toJson()},
                             {"config_hash", r.config->contentHash()}});
        },
        py::arg("doc"), py::arg("policy") = "autonomous", py::arg("answers") = py::none(),
        "Resolve a spec. Returns config, ledger and hash, or the open clarification items.");

    m.def(
        "simulate",
        [](const py::object& config, const std::string& out) {
            auto c = gl::spec::configFromDocument(toJson(config));
            auto run = [&] {
                py::gil_scoped_release release;
                return gl::pipeline::run(c);
            }();
            if (!out.empty())
                gl::pipeline::writeResults(out, run);
            return fromJson(gl::pipeline::runManifest(run));
        },
        py::arg("config"), py::arg("out") = "", "Run a resolved config; optionally write results to a directory.");

    m.def(
        "degrade",
        [](const py::object& doc, const std::string& level) {
            auto mask = gl::audit::LevelMask::forLevel(gl::spec::levelFromString(level));
            return fromJson(gl::audit::degrade(specOf(doc), mask).doc);
        },
        py::arg("doc"), py::arg("level"));

    m.def(
        "diff",
        [](const std::string& ref, const std::string& cand, const std::vector<double>& fractions) {
            return fromJson(gl::audit::diff(loadSubject(ref), loadSubject(cand), fractions).toJson());
        },
        py::arg("ref"), py::arg("cand"), py::arg("pvi_fractions") = gl::audit::kDefaultFractions,
        "Diff two result directories.");

    m.def(
        "audit_matrix",
        [](const py::object& doc) {
            auto s = specOf(doc);
            auto matrix = [&] {
                py::gil_scoped_release release;
                return gl::audit::auditMatrix(s);
            }();
            return fromJson(matrix.toJson());
        },
        py::arg("doc"));

    m.def(
        "search",
        [](const std::string& query, std::size_t k) {
            static const auto index = gl::orch::DocIndex::load(gl::orch::dataDir());
            auto hits = Json::array();
            for (const auto& h: index.search(query, k))
                hits.push_back({{"id", h.entry->id},
                                {"kind", gl::orch::toString(h.entry->kind)},
                                {"title", h.entry->title},
                                {"score", h.score}});
            return fromJson(hits);
        },
        py::arg("query"), py::arg("k") = 10);

    m.def(
        "replay",
        [](const std::string& log) {
            auto outcome = gl::orch::replay(gl::orch::EventLog::load(log));
            return fromJson({{"matches", outcome.matches()},
                             {"phase", gl::orch::toString(outcome.state.phase)},
                             {"original_hash", outcome.originalHash},
                             {"replayed_hash", outcome.replayedHash}});
        },
        py::arg("log"));
}
