// SPDX-License-Identifier: Apache-2.0
#include <groundloop/orchestrator.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace groundloop::orch
{

const char* toString(DocKind k)
{
    switch (k)
    {
        case DocKind::Doc: return "doc";
        case DocKind::Docstring: return "docstring";
        case DocKind::Example: return "example";
    }
    return "?";
}

std::vector<std::string> tokenize(const std::string& text)
{
    auto out = std::vector<std::string> {};
    auto current = std::string {};
    auto flush = [&] {
        if (current.empty())
            return;
        if (current.size() > 3 && current.back() == 's' && current[current.size() - 2] != 's')
            current.pop_back();
        out.push_back(current);
        current.clear();
    };
    for (unsigned char ch : text)
    {
        if (std::isalnum(ch))
            current.push_back(static_cast<char>(std::tolower(ch)));
        else
            flush();
    }
    flush();
    return out;
}

DocIndex::DocIndex(std::vector<DocEntry> entries): _entries(std::move(entries))
{
    std::sort(_entries.begin(), _entries.end(), [](const DocEntry& a, const DocEntry& b) { return a.id < b.id; });
    for (std::size_t n = 0; n < _entries.size(); ++n)
    {
        auto counts = std::map<std::string, std::pair<double, double>> {};
        for (const auto& t : tokenize(_entries[n].title))
            counts[t].first += 1.0;
        for (const auto& t : tokenize(_entries[n].body))
            counts[t].second += 1.0;
        for (const auto& [term, c] : counts)
            _postings[term].push_back({n, c.first, c.second});
    }
}

namespace
{

std::string readText(const std::filesystem::path& file)
{
    auto in = std::ifstream(file);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read", file.string());
    auto s = std::stringstream {};
    s << in.rdbuf();
    return s.str();
}

std::vector<std::filesystem::path> filesWithExtension(const std::filesystem::path& dir, const std::string& ext)
{
    auto out = std::vector<std::filesystem::path> {};
    if (!std::filesystem::is_directory(dir))
        return out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext)
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

/// One entry per "## " section of a markdown page, titled "<page>: <section>".
void addMarkdown(std::vector<DocEntry>& entries, const std::filesystem::path& file)
{
    auto stem = file.stem().string();
    auto in = std::istringstream(readText(file));
    auto pageTitle = stem;
    auto module = std::string {};
    auto section = std::string {};
    auto body = std::string {};
    auto count = 0;
    auto flush = [&] {
        if (section.empty() && body.find_first_not_of(" \n") == std::string::npos)
            return;
        auto e = DocEntry {};
        e.id = "doc:" + stem + "#" + std::to_string(count++);
        e.kind = DocKind::Doc;
        e.title = section.empty() ? pageTitle : pageTitle + ": " + section;
        e.body = body;
        e.module = module;
        entries.push_back(std::move(e));
        body.clear();
    };
    for (std::string line; std::getline(in, line);)
    {
        if (line.rfind("# ", 0) == 0)
            pageTitle = line.substr(2);
        else if (line.rfind("## ", 0) == 0)
        {
            flush();
            section = line.substr(3);
        }
        else if (line.rfind("module: ", 0) == 0)
            module = line.substr(8);
        else
            body += line + "\n";
    }
    flush();
}

std::string snippetFor(const std::string& body, const std::set<std::string>& terms)
{
    auto pos = std::size_t {0};
    while (pos < body.size())
    {
        auto end = body.find_first_of(".\n", pos);
        if (end == std::string::npos)
            end = body.size();
        auto sentence = body.substr(pos, end - pos);
        for (const auto& t : tokenize(sentence))
            if (terms.count(t))
            {
                auto first = sentence.find_first_not_of(" \t-*");
                sentence = first == std::string::npos ? std::string() : sentence.substr(first);
                return sentence.size() > 200 ? sentence.substr(0, 197) + "..." : sentence;
            }
        pos = end + 1;
    }
    auto head = body.substr(0, std::min<std::size_t>(body.size(), 200));
    std::replace(head.begin(), head.end(), '\n', ' ');
    return head;
}

} // namespace

DocIndex DocIndex::load(const std::filesystem::path& dataDir)
{
    auto entries = std::vector<DocEntry> {};
    for (const auto& file : filesWithExtension(dataDir / "docs", ".md"))
        addMarkdown(entries, file);

    auto docstrings = dataDir / "docs" / "docstrings.json";
    if (std::filesystem::exists(docstrings))
    {
        auto j = Json::parse(readText(docstrings));
        for (const auto& d : j.at("operations"))
        {
            auto e = DocEntry {};
            e.kind = DocKind::Docstring;
            auto name = d.at("name").get<std::string>();
            e.id = "docstring:" + name;
            e.title = name + ": " + d.value("title", std::string());
            e.module = d.at("module").get<std::string>();
            e.body = d.at("signature").get<std::string>() + "\n" + d.at("summary").get<std::string>();
            if (d.contains("errors"))
                for (const auto& err : d["errors"])
                    e.body += "\nerror " + err.get<std::string>();
            entries.push_back(std::move(e));
        }
    }

    for (const auto& file : filesWithExtension(dataDir / "specs", ".json"))
    {
        auto j = Json::parse(readText(file));
        auto e = DocEntry {};
        e.kind = DocKind::Example;
        e.id = "example:" + file.stem().string();
        e.module = "spec_engine";
        const auto meta = j.value("meta", Json::object());
        e.title = meta.value("title", file.stem().string());
        e.body = meta.value("description", std::string());
        entries.push_back(std::move(e));
    }
    return DocIndex(std::move(entries));
}

std::vector<SearchHit> DocIndex::search(const std::string& query, std::size_t k, std::optional<DocKind> kind) const
{
    auto terms = std::set<std::string> {};
    for (const auto& t : tokenize(query))
        terms.insert(t);
    auto scores = std::map<std::size_t, double> {};
    auto n = static_cast<double>(_entries.size());
    auto weight = [](double c) { return c > 0.0 ? 1.0 + std::log(c) : 0.0; };
    for (const auto& term : terms)
    {
        auto it = _postings.find(term);
        if (it == _postings.end())
            continue;
        auto idf = std::log(1.0 + n / static_cast<double>(it->second.size()));
        for (const auto& p : it->second)
            scores[p.entry] += idf * (3.0 * weight(p.titleCount) + weight(p.bodyCount));
    }
    auto hits = std::vector<SearchHit> {};
    for (const auto& [entry, score] : scores)
    {
        if (kind && _entries[entry].kind != *kind)
            continue;
        hits.push_back({&_entries[entry], score, snippetFor(_entries[entry].body, terms)});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return a.entry->id < b.entry->id;
    });
    if (hits.size() > k)
        hits.resize(k);
    return hits;
}

const DocEntry& DocIndex::lookup(const std::string& symbol) const
{
    for (const auto& e : _entries)
        if (e.kind == DocKind::Docstring && e.id == "docstring:" + symbol)
            return e;
    throw Error(ErrorKind::NotFound, "no docstring for '" + symbol + "'", symbol);
}

std::filesystem::path dataDir()
{
    if (const char* env = std::getenv("GROUNDLOOP_DATA"); env && *env)
        return env;
    return GROUNDLOOP_DATA_DIR;
}

} // namespace groundloop::orch
