// Acceptance suite. One PASS/FAIL line per criterion; exits 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "ragmt/cli.hpp"
#include "ragmt/ragmt.hpp"
#include "support/bm25_oracle.hpp"
#include "support/golden.hpp"
#include "support/synthetic.hpp"

using namespace ragmt;
namespace rt = ragmt::testing;

namespace {

// Tolerances and budgets.
constexpr double kScoreTolerance = 1e-9;
constexpr double kGoldenTolerance = 1e-4;
constexpr double kImprovementTolerance = 1e-3;
constexpr double kBaselineTolerance = 1e-2;
constexpr double kBm25Seconds = 10.0;
constexpr double kGoldenSeconds = 5.0;
constexpr double kIdentitySeconds = 30.0;
constexpr double kEndToEndSeconds = 5.0;
constexpr double kSweepSeconds = 30.0;
constexpr std::size_t kMinPropertyCases = 1000;
constexpr std::size_t kMinTokens = 3000;
constexpr std::size_t kMaxTokens = 5000;

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

struct Criterion {
    int number;
    std::string name;
    double budget_seconds; // 0 means no time limit
    std::function<Outcome()> check;
};

std::string fmt(const char* format, double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, format, value);
    return buffer;
}

Outcome bm25_oracle_equivalence() {
    Outcome outcome;
    rt::Rng rng(20240601);
    std::size_t queries = 0;
    for (int corpus_no = 0; corpus_no < 50; ++corpus_no) {
        const rt::Bm25Corpus corpus = rt::random_bm25_corpus(rng, 100, 50);
        const Bm25Index index = Bm25Index::build(corpus.bank, corpus.params);
        for (int q = 0; q < 20; ++q, ++queries) {
            const std::string query = rt::random_bm25_query(rng, 50);
            const std::size_t r = rng() % (corpus.bank.size() + 5);
            const RetrievedSet got = retrieve(index, corpus.bank, query, r);
            const auto expected = rt::brute_force_retrieve(corpus.bank, corpus.params, query, r);
            if (got.entries.size() != expected.size()) {
                outcome.fail("corpus " + std::to_string(corpus_no) + ": size mismatch");
                continue;
            }
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (got.entries[i].pair.id != expected[i].first) {
                    outcome.fail("corpus " + std::to_string(corpus_no) + " query '" + query + "': rank " +
                                 std::to_string(i) + " differs");
                }
                if (std::abs(got.entries[i].score - expected[i].second) > kScoreTolerance) {
                    outcome.fail("corpus " + std::to_string(corpus_no) + ": score differs by " +
                                 fmt("%g", std::abs(got.entries[i].score - expected[i].second)));
                }
            }
        }
    }
    if (outcome.pass) outcome.detail = "50 corpora, " + std::to_string(queries) + " queries";
    return outcome;
}

Outcome chrf_golden_agreement() {
    Outcome outcome;
    const auto suites = rt::load_chrf_golden(rt::golden_path("chrf_golden.tsv"));
    std::size_t sentences = 0;
    double worst = 0;
    for (const auto& suite : suites) {
        ChrfParams params;
        params.word_tokenizer = suite.tokenizer;
        std::vector<std::string> hyps, refs;
        for (const auto& pair : suite.sentences) {
            worst = std::max(worst, std::abs(sentence_chrf(pair.hyp, pair.ref, params) - pair.score));
            hyps.push_back(pair.hyp);
            refs.push_back(pair.ref);
        }
        sentences += hyps.size();
        worst = std::max(worst, std::abs(corpus_chrf(hyps, refs, params) - suite.corpus_score));
    }
    if (sentences < 100) outcome.fail("only " + std::to_string(sentences) + " golden pairs");
    if (worst > kGoldenTolerance) outcome.fail("max deviation " + fmt("%g", worst));
    if (outcome.pass) outcome.detail = std::to_string(sentences) + " pairs, max deviation " + fmt("%.2g", worst);
    return outcome;
}

std::string property_text(rt::Rng& rng) {
    switch (rng() % 3) {
    case 0: return rt::spanish_caption(rng, 1, 12);
    case 1: return rt::guarani_caption(rng, 1, 12);
    default: return rt::random_unicode(rng, 30);
    }
}

Outcome metric_identities() {
    Outcome outcome;
    rt::Rng rng(77);
    std::size_t cases = 0;
    for (; cases < 1200; ++cases) {
        const std::size_t n = 1 + rng() % 8;
        std::vector<std::string> hyps, refs;
        for (std::size_t i = 0; i < n; ++i) {
            hyps.push_back(rng() % 10 == 0 ? std::string{} : property_text(rng));
            refs.push_back(rt::spanish_caption(rng, 1, 10));
        }

        if (std::abs(corpus_chrf(refs, refs) - 100.0) > 1e-12) outcome.fail("corpus_chrf(X,X) != 100");

        const ChrfStatistics empty = sentence_stats("", refs[0]);
        for (const OrderStats& order : empty.orders) {
            if (order.matched != 0 || order.hyp_total != 0) outcome.fail("empty hypothesis produced matches");
        }

        for (std::size_t i = 0; i < n; ++i) {
            const double s = sentence_chrf(hyps[i], refs[i]);
            if (!(s >= 0.0 && s <= 100.0)) outcome.fail("sentence score out of range: " + fmt("%g", s));
        }
        const double corpus = corpus_chrf(hyps, refs);
        if (!(corpus >= 0.0 && corpus <= 100.0)) outcome.fail("corpus score out of range");

        const std::size_t cut = rng() % (n + 1);
        const std::span<const std::string> h(hyps), r(refs);
        ChrfStatistics left = ChrfStatistics::zeros({});
        ChrfStatistics right = ChrfStatistics::zeros({});
        if (cut > 0) left = corpus_stats(h.first(cut), r.first(cut));
        if (cut < n) right = corpus_stats(h.subspan(cut), r.subspan(cut));
        ChrfStatistics summed = ChrfStatistics::zeros({});
        for (std::size_t i = 0; i < n; ++i) summed += sentence_stats(hyps[i], refs[i]);
        const ChrfStatistics whole = corpus_stats(hyps, refs);
        if (!(left + right == whole) || !(summed == whole)) outcome.fail("statistics are not additive");
    }
    if (cases < kMinPropertyCases) outcome.fail("too few cases");
    if (outcome.pass) outcome.detail = std::to_string(cases) + " cases";
    return outcome;
}

Outcome end_to_end_oracle() {
    Outcome outcome;
    rt::TempDir dir;
    const auto dev = rt::dev_set(404);
    {
        std::ofstream out(dir / "dev.jsonl", std::ios::binary);
        write_dataset(out, dev);
        std::ofstream bank(dir / "bank.jsonl", std::ios::binary);
        write_bank(bank, rt::guarani_bank(405, 1500, 500));
    }
    const std::pair<std::size_t, std::size_t> configs[] = {{0, 0}, {80, 49}, {10, 20}, {3, 50}};
    for (const auto& [r, d] : configs) {
        cli::TranslateOptions options;
        options.dataset = dir / "dev.jsonl";
        options.bank = dir / "bank.jsonl";
        options.language = "grn";
        options.r = r;
        options.d = d;
        options.out = dir / "submission.jsonl";
        std::ostringstream out, err;
        if (cli::cmd_translate(options, {}, out, err) != cli::kExitOk) {
            outcome.fail("translate failed: " + err.str());
            continue;
        }
        std::ifstream submission(options.out);
        std::string line;
        std::size_t i = 0;
        for (; std::getline(submission, line); ++i) {
            const auto record = nlohmann::json::parse(line);
            if (i >= dev.size() || record["caption"] != *dev[i].reference_target) {
                outcome.fail("r=" + std::to_string(r) + " d=" + std::to_string(d) + ": line " + std::to_string(i + 1) +
                             " differs from the reference");
                break;
            }
        }
        if (i != dev.size()) outcome.fail("wrong number of output lines");

        cli::ScoreOptions score;
        score.hyp = options.out;
        score.ref = options.dataset;
        std::ostringstream printed;
        cli::cmd_score(score, printed, err);
        if (printed.str() != "100.00\n") outcome.fail("cmd_score printed '" + printed.str() + "'");
    }
    if (outcome.pass) outcome.detail = "50 examples x 4 (r,d) configs, score 100.00";
    return outcome;
}

Outcome prompt_contract() {
    Outcome outcome;
    const RetrievalBank bank = rt::guarani_bank(2023);
    const Bm25Index index = Bm25Index::build(bank);
    const LanguageProfile profile = builtin_profile(Language::grn);
    const PromptTemplate tmpl = resolve_template(TemplateRegistry::builtin(), profile);
    const auto dev = rt::dev_set(2024);
    auto backend = mock_oracle({});
    const PipelineResources res{bank, index, profile, tmpl, dev, *backend, nullptr};
    PipelineOptions options;
    options.r = profile.default_r;
    options.d = profile.default_d;
    if (options.r != 80 || options.d != 49) outcome.fail("Guaraní defaults are not r=80, d=49");

    rt::Rng rng(2025);
    std::size_t low = SIZE_MAX, high = 0;
    for (int i = 0; i < 20; ++i) {
        const CaptionExample query{"q" + std::to_string(i), rt::spanish_caption(rng, 10, 30), std::nullopt};
        const AssembledPrompt prompt = build_prompt(res, options, query);
        const std::size_t lines = count_exemplar_lines(prompt.user_text);
        if (lines != 129) outcome.fail("exemplar lines = " + std::to_string(lines));
        low = std::min(low, prompt.token_estimate);
        high = std::max(high, prompt.token_estimate);
        if (prompt.token_estimate < kMinTokens || prompt.token_estimate > kMaxTokens) {
            outcome.fail("token estimate " + std::to_string(prompt.token_estimate) + " outside [3000, 5000]");
        }
        // Byte stability: a rebuilt index and a second assembly agree.
        if (i == 0) {
            const Bm25Index again = Bm25Index::build(bank);
            const PipelineResources res2{bank, again, profile, tmpl, dev, *backend, nullptr};
            if (!(build_prompt(res2, options, query) == prompt)) outcome.fail("assembly is not byte-stable");
            const auto snapshot_path = rt::golden_path("prompt_grn_r80_d49.txt");
            const std::string rendered = "[system]\n" + prompt.system_text + "\n[user]\n" + prompt.user_text + "\n";
            if (std::getenv("RAGMT_UPDATE_SNAPSHOTS")) rt::write_text(snapshot_path, rendered);
            if (!std::filesystem::exists(snapshot_path)) {
                outcome.fail("snapshot prompt_grn_r80_d49.txt missing");
            } else if (rt::read_text(snapshot_path) != rendered) {
                outcome.fail("prompt differs from the committed snapshot");
            }
        }
    }
    if (outcome.pass) {
        outcome.detail = "20 prompts, 129 exemplar lines, tokens " + std::to_string(low) + ".." + std::to_string(high);
    }
    return outcome;
}

Outcome nfd_correctness() {
    Outcome outcome;
    const LanguageProfile bzd = builtin_profile(Language::bzd);
    if (nfd_normalize("\u00EB") != "e\u0308") outcome.fail("U+00EB did not decompose to e + U+0308");
    if (clean("TGT: K\u00F6\u0301m \u00EB", bzd).text != "Ko\u0308\u0301m e\u0308") outcome.fail("bzd clean kept precomposed text");

    rt::Rng rng(6);
    std::size_t cases = 0, cleaned = 0;
    const LanguageProfile grn = builtin_profile(Language::grn);
    for (; cases < 1000; ++cases) {
        const std::string raw = rt::random_unicode(rng, 50);
        for (const LanguageProfile* profile : {&bzd, &grn}) {
            CleanCaption once;
            try {
                once = clean(raw, *profile);
            } catch (const Error&) {
                continue; // nothing left after stripping
            }
            ++cleaned;
            if (clean(once.text, *profile).text != once.text) outcome.fail("clean is not idempotent");
            if (profile->apply_nfd && nfd_normalize(once.text) != once.text) outcome.fail("bzd output is not an NFD fixed point");
        }
    }
    if (cleaned < kMinPropertyCases) outcome.fail("only " + std::to_string(cleaned) + " strings survived cleaning");
    if (outcome.pass) outcome.detail = std::to_string(cases) + " random strings, " + std::to_string(cleaned) + " cleaned outputs";
    return outcome;
}

Outcome percent_improvement_consistency() {
    Outcome outcome;
    const double improvement = percent_improvement(23.60, 22.40);
    if (std::abs(improvement - 5.357) > kImprovementTolerance) outcome.fail("23.60 vs 22.40 gave " + fmt("%.4f", improvement));
    // Back-solve the baseline from the score and the reported gain.
    const double baseline = 19.99 / (1.0 + 164.1 / 100.0);
    if (std::abs(baseline - 7.569) > kBaselineTolerance) outcome.fail("baseline " + fmt("%.4f", baseline));
    if (std::abs(percent_improvement(19.99, baseline) - 164.1) > 1e-9) outcome.fail("round trip through the baseline");
    if (outcome.pass) outcome.detail = "+" + fmt("%.3f", improvement) + "%, baseline " + fmt("%.3f", baseline);
    return outcome;
}

Outcome sweep_determinism() {
    Outcome outcome;
    rt::TempDir dir;
    {
        std::ofstream out(dir / "dev.jsonl", std::ios::binary);
        write_dataset(out, rt::dev_set(808));
        std::ofstream bank(dir / "bank.jsonl", std::ios::binary);
        write_bank(bank, rt::guarani_bank(809));
    }
    cli::SweepOptions options;
    options.dataset = dir / "dev.jsonl";
    options.bank = dir / "bank.jsonl";
    options.language = "grn";
    cli::CommonOptions common;
    common.cache = dir / "cache.jsonl";

    std::string reports[2][2];
    std::string logs[2];
    for (int run = 0; run < 2; ++run) {
        options.out = dir / ("report" + std::to_string(run));
        std::ostringstream out, err;
        if (cli::cmd_sweep(options, common, out, err) != cli::kExitOk) outcome.fail("sweep failed: " + err.str());
        reports[run][0] = rt::read_text(dir / ("report" + std::to_string(run) + ".tsv"));
        reports[run][1] = rt::read_text(dir / ("report" + std::to_string(run) + ".txt"));
        logs[run] = err.str();
    }
    if (reports[0][0] != reports[1][0] || reports[0][1] != reports[1][1]) outcome.fail("reports differ between runs");
    if (std::count(reports[0][0].begin(), reports[0][0].end(), '\n') != 31) outcome.fail("expected 30 cells");
    if (logs[0].find("backend calls=1500") == std::string::npos) outcome.fail("first run: " + logs[0]);
    if (logs[1].find("backend calls=0") == std::string::npos) outcome.fail("second run: " + logs[1]);
    if (outcome.pass) outcome.detail = "30 cells, 1500 calls then 0";
    return outcome;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "BM25 oracle equivalence", kBm25Seconds, bm25_oracle_equivalence},
        {2, "chrF++ golden agreement", kGoldenSeconds, chrf_golden_agreement},
        {3, "metric identities", kIdentitySeconds, metric_identities},
        {4, "end-to-end oracle run", kEndToEndSeconds, end_to_end_oracle},
        {5, "prompt contract", 0, prompt_contract},
        {6, "NFD correctness", 0, nfd_correctness},
        {7, "percent-improvement consistency", 0, percent_improvement_consistency},
        {8, "sweep determinism and caching", kSweepSeconds, sweep_determinism},
    };
    int failures = 0;
    for (const Criterion& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criterion.check();
        } catch (const std::exception& e) {
            outcome.fail(std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (criterion.budget_seconds > 0 && seconds > criterion.budget_seconds) {
            outcome.fail("took " + fmt("%.2f", seconds) + " s, budget " + fmt("%.0f", criterion.budget_seconds) + " s");
        }
        failures += outcome.pass ? 0 : 1;
        std::cout << (outcome.pass ? "PASS" : "FAIL") << "  " << criterion.number << ". " << criterion.name << " ("
                  << fmt("%.2f", seconds) << " s): " << outcome.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed\n";
    return failures == 0 ? 0 : 1;
}
