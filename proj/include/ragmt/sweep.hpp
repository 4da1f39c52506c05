#pragma once

// (r, d) grid sweeps over a referenced dev set, reported in the
// language / r / d / chrF++ / notes table layout.

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ragmt/corpus.hpp"
#include "ragmt/metrics.hpp"
#include "ragmt/pipeline.hpp"

namespace ragmt {

struct SweepGrid {
    std::vector<std::size_t> r_values{0, 10, 20, 40, 80};
    std::vector<std::size_t> d_values{0, 10, 20, 30, 40, 49};
    Language language = Language::grn;
    BankFilter bank_filter = BankFilter::all;
};

struct SweepCell {
    std::size_t r = 0;           ///< requested
    std::size_t d = 0;
    std::size_t effective_r = 0; ///< min(r, bank size)
    double corpus_score = 0.0;
    std::string notes;
    bool failed = false;

    bool operator==(const SweepCell&) const = default;
};

/// Shared inputs of every cell in a sweep. The dataset doubles as the dev
/// exemplar pool.
struct SweepSetup {
    std::span<const CaptionExample> dataset;
    const RetrievalBank& bank;
    const Bm25Index& index;
    const LanguageProfile& profile;
    const PromptTemplate& prompt_template;
    Backend& backend;
    ResponseCache* cache = nullptr;
    PipelineOptions options; ///< r and d are ignored; each cell sets its own
    ChrfParams metric;
};

inline std::size_t available_dev_exemplars(std::span<const CaptionExample> dataset, bool holdout_self) {
    if (dataset.empty()) return 0;
    return holdout_self ? dataset.size() - 1 : dataset.size();
}

namespace detail {

inline std::string cell_notes(const SweepGrid& grid, const SweepSetup& setup, std::size_t r, std::size_t effective_r) {
    std::vector<std::string> parts;
    if (effective_r != r) {
        parts.push_back("requested r=" + std::to_string(r) + "; bank has " + std::to_string(setup.bank.size()) +
                        " pairs");
    }
    if (grid.bank_filter == BankFilter::exclude_synthetic) parts.emplace_back("synthetic pairs excluded");
    if (setup.prompt_template.variant != TemplateVariant::standard) {
        parts.push_back(std::string(to_string(setup.prompt_template.variant)) + " prompt");
    }
    if (setup.profile.apply_nfd) parts.emplace_back("NFD");
    if (setup.options.holdout_self) parts.emplace_back("holdout-self");
    std::string notes;
    for (const std::string& part : parts) notes += (notes.empty() ? "" : "; ") + part;
    return notes;
}

} // namespace detail

/// Full pipeline over the dataset for one (r, d), scored with corpus chrF++.
inline SweepCell run_cell(const SweepGrid& grid, std::size_t r, std::size_t d, const SweepSetup& setup) {
    std::vector<std::string> refs;
    refs.reserve(setup.dataset.size());
    for (const CaptionExample& example : setup.dataset) {
        if (!example.reference_target) {
            throw ExampleError(example.example_id, "sweep requires reference captions");
        }
        refs.push_back(*example.reference_target);
    }
    if (refs.empty()) throw Error("sweep dataset is empty");

    PipelineOptions options = setup.options;
    options.r = r;
    options.d = d;
    options.keep_going = false;
    const PipelineResources resources{setup.bank,          setup.index, setup.profile, setup.prompt_template,
                                      setup.dataset,       setup.backend, setup.cache};
    const std::vector<TranslationResult> results = translate_all(resources, options, setup.dataset);

    std::vector<std::string> hyps;
    hyps.reserve(results.size());
    for (const TranslationResult& result : results) hyps.push_back(result.caption);

    SweepCell cell;
    cell.r = r;
    cell.d = d;
    cell.effective_r = std::min(r, setup.bank.size());
    cell.corpus_score = corpus_chrf(hyps, refs, setup.metric);
    cell.notes = detail::cell_notes(grid, setup, r, cell.effective_r);
    return cell;
}

/// Report order: score descending, then effective r, d and requested r
/// ascending; failed cells last.
inline void sort_cells(std::vector<SweepCell>& cells) {
    std::stable_sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
        if (a.failed != b.failed) return !a.failed;
        if (a.corpus_score != b.corpus_score) return a.corpus_score > b.corpus_score;
        if (a.effective_r != b.effective_r) return a.effective_r < b.effective_r;
        if (a.d != b.d) return a.d < b.d;
        return a.r < b.r;
    });
}

/// Every (r, d) in d-major order, skipping d values beyond the available dev
/// exemplars. A failing cell aborts the sweep unless `keep_going` is set in
/// the setup options, in which case it is reported as failed.
inline std::vector<SweepCell> run_grid(const SweepGrid& grid, const SweepSetup& setup) {
    const std::size_t available = available_dev_exemplars(setup.dataset, setup.options.holdout_self);
    std::vector<SweepCell> cells;
    for (std::size_t d : grid.d_values) {
        if (d > available) continue;
        for (std::size_t r : grid.r_values) {
            try {
                cells.push_back(run_cell(grid, r, d, setup));
            } catch (const std::exception& e) {
                if (!setup.options.keep_going) throw;
                SweepCell cell;
                cell.r = r;
                cell.d = d;
                cell.effective_r = std::min(r, setup.bank.size());
                cell.failed = true;
                cell.notes = std::string("error: ") + e.what();
                cells.push_back(std::move(cell));
            }
        }
    }
    sort_cells(cells);
    return cells;
}

inline std::string format_score(const SweepCell& cell) {
    if (cell.failed) return "n/a";
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", cell.corpus_score);
    return buffer;
}

inline void write_report_tsv(std::ostream& out, Language language, std::span<const SweepCell> cells) {
    out << "language\tr\td\tchrF++\tnotes\n";
    for (const SweepCell& cell : cells) {
        out << display_name(language) << '\t' << cell.effective_r << '\t' << cell.d << '\t' << format_score(cell)
            << '\t' << cell.notes << '\n';
    }
}

inline void write_report_text(std::ostream& out, Language language, std::span<const SweepCell> cells) {
    const std::vector<std::string> header{"Language", "r", "d", "chrF++", "Notes"};
    std::vector<std::vector<std::string>> rows;
    for (const SweepCell& cell : cells) {
        rows.push_back({std::string(display_name(language)), std::to_string(cell.effective_r), std::to_string(cell.d),
                        format_score(cell), cell.notes.empty() ? "-" : cell.notes});
    }
    std::vector<std::size_t> widths(header.size());
    const auto width_of = [](const std::string& s) { return unicode::codepoint_count(s); };
    for (std::size_t c = 0; c < header.size(); ++c) {
        widths[c] = width_of(header[c]);
        for (const auto& row : rows) widths[c] = std::max(widths[c], width_of(row[c]));
    }
    const auto emit = [&](const std::vector<std::string>& row) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            // Numeric columns right-aligned, text columns left-aligned.
            const bool numeric = c >= 1 && c <= 3;
            const std::string pad(widths[c] - width_of(row[c]), ' ');
            if (c > 0) line += "  ";
            line += numeric ? pad + row[c] : row[c] + (c + 1 < row.size() ? pad : "");
        }
        out << line << '\n';
    };
    emit(header);
    std::string rule;
    for (std::size_t c = 0; c < widths.size(); ++c) rule += (c ? "  " : "") + std::string(widths[c], '-');
    out << rule << '\n';
    for (const auto& row : rows) emit(row);
}

} // namespace ragmt
