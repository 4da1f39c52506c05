#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "ragmt/promptkit.hpp"
#include "support/synthetic.hpp"

using namespace ragmt;

namespace {

std::vector<CaptionExample> small_dev() {
    return {
        {"d0", "Una mujer teje una canasta.", "Peteĩ kuña ojapo ajaka."},
        {"d1", "Un perro corre en el campo.", "Peteĩ jagua oñani ñúme."},
        {"d2", "Dos niños juegan junto al río.", "Mokõi mitã ohuga ysyry ykére."},
        {"d3", "Un anciano vende maíz.", "Peteĩ tujami ohepyme'ẽ avati."},
        {"d4", "Una casa de madera.", "Peteĩ óga yvyrágui."},
        {"d5", "Un caballo blanco.", "Peteĩ kavaju morotĩ."},
    };
}

RetrievedSet retrieved_of(std::vector<ParallelPair> pairs) {
    RetrievedSet set;
    set.query = "q";
    double score = 10.0;
    for (ParallelPair& pair : pairs) set.entries.push_back({std::move(pair), score -= 1.0});
    return set;
}

std::filesystem::path golden(const std::string& name) { return std::filesystem::path(RAGMT_GOLDEN_DIR) / name; }

void expect_snapshot(const std::string& name, const std::string& actual) {
    const auto path = golden(name);
    if (std::getenv("RAGMT_UPDATE_SNAPSHOTS") != nullptr) {
        std::ofstream(path, std::ios::binary) << actual;
        GTEST_SKIP() << "snapshot " << name << " rewritten";
    }
    const std::string expected = ragmt::testing::read_text(path);
    ASSERT_FALSE(expected.empty()) << "missing snapshot " << path;
    EXPECT_EQ(actual, expected);
}

} // namespace

TEST(SelectDevExemplars, FirstDInFileOrder) {
    const auto dev = ragmt::testing::dev_set(4);
    const auto pairs = select_dev_exemplars(dev, 49);
    ASSERT_EQ(pairs.size(), 49u);
    for (std::size_t i = 0; i < 49; ++i) {
        EXPECT_EQ(pairs[i].source_es, dev[i].spanish_caption);
        EXPECT_EQ(pairs[i].target, *dev[i].reference_target);
        EXPECT_EQ(pairs[i].origin, Origin::dev);
    }
    EXPECT_EQ(select_dev_exemplars(dev, 50).size(), 50u);
}

TEST(SelectDevExemplars, ZeroIsEmpty) { EXPECT_TRUE(select_dev_exemplars(small_dev(), 0).empty()); }

TEST(SelectDevExemplars, HoldoutSkipsCurrent) {
    const auto dev = small_dev();
    const auto pairs = select_dev_exemplars(dev, 5, "d3", true);
    std::vector<std::size_t> ids;
    for (const auto& pair : pairs) ids.push_back(pair.id);
    EXPECT_EQ(ids, (std::vector<std::size_t>{0, 1, 2, 4, 5}));
    // Without holdout the current example is an ordinary exemplar.
    EXPECT_EQ(select_dev_exemplars(dev, 5, "d3", false)[3].source_es, dev[3].spanish_caption);
}

TEST(SelectDevExemplars, Errors) {
    const auto dev = small_dev();
    EXPECT_THROW(select_dev_exemplars(dev, 7), Error);
    EXPECT_THROW(select_dev_exemplars(dev, 6, "d0", true), Error);
    EXPECT_NO_THROW(select_dev_exemplars(dev, 6, "unknown", true));
    auto unreferenced = dev;
    unreferenced[1].reference_target.reset();
    EXPECT_THROW(select_dev_exemplars(unreferenced, 2), Error);
    EXPECT_NO_THROW(select_dev_exemplars(unreferenced, 1));
}

TEST(Templates, BuiltinRegistry) {
    const TemplateRegistry registry = TemplateRegistry::builtin();
    for (Language language : kAllLanguages) EXPECT_TRUE(registry.contains(std::string(code(language)) + "_system"));
    EXPECT_TRUE(registry.contains("standard"));
    EXPECT_EQ(registry.find("hch_glossary_v2").variant, TemplateVariant::wixarika_glossary_v2);
    EXPECT_EQ(registry.find("hch_glossary_v3").variant, TemplateVariant::wixarika_glossary_v3);
    EXPECT_THROW(registry.find("nope"), Error);
}

TEST(Templates, StandardInstructions) {
    const PromptTemplate tmpl = resolve_template(TemplateRegistry::builtin(), builtin_profile(Language::grn));
    EXPECT_EQ(tmpl.system_text.find("{language_name}"), std::string::npos);
    EXPECT_NE(tmpl.system_text.find("Spanish into Guaraní"), std::string::npos);
    EXPECT_NE(tmpl.system_text.find("style"), std::string::npos);
    EXPECT_NE(tmpl.system_text.find("concise"), std::string::npos);
    EXPECT_NE(tmpl.system_text.find("culturally specific nouns"), std::string::npos);
    EXPECT_NE(tmpl.system_text.find("exactly one line"), std::string::npos);
}

TEST(Templates, MorphologicalBlock) {
    const std::string block = render_morphological_block();
    EXPECT_EQ(block, render_morphological_block());
    for (const char* needle : {"SOV", "verb-final", "tonal diacritics", "consonant clusters", "possessive prefix"}) {
        EXPECT_NE(block.find(needle), std::string::npos) << needle;
    }

    const TemplateRegistry registry = TemplateRegistry::builtin();
    const PromptTemplate bribri = resolve_template(registry, builtin_profile(Language::bzd));
    EXPECT_TRUE(bribri.system_text.ends_with(block));
    EXPECT_EQ(bribri.variant, TemplateVariant::morphological_bribri);
    EXPECT_NE(bribri.system_text.find("Subject-Object-Verb (SOV)"), std::string::npos);
    // Block is not duplicated when the template already carries it.
    EXPECT_EQ(bribri.system_text.find(block), bribri.system_text.rfind(block));

    LanguageProfile standard = builtin_profile(Language::bzd);
    standard.system_template_id = "standard";
    standard.morphological_block.reset();
    EXPECT_EQ(resolve_template(registry, standard).system_text.find("SOV"), std::string::npos);
    for (Language language : {Language::grn, Language::nah, Language::hch, Language::yua}) {
        const PromptTemplate tmpl = resolve_template(registry, builtin_profile(language));
        EXPECT_EQ(tmpl.system_text.find(block), std::string::npos);
    }

    // A block from the profile is appended to templates that lack it.
    LanguageProfile appended = builtin_profile(Language::bzd);
    appended.system_template_id = "standard";
    EXPECT_TRUE(resolve_template(registry, appended).system_text.ends_with(block));
}

TEST(Templates, LoadFromFiles) {
    ragmt::testing::TempDir dir;
    ragmt::testing::write_text(dir / "terse.txt", "Translate into {language_name}. One line.\n\n");
    ragmt::testing::write_text(dir / "grn_system.txt", "Custom Guaraní prompt for {language_name}.");
    ragmt::testing::write_text(dir / "notes.md", "ignored");
    TemplateRegistry registry = TemplateRegistry::builtin();
    registry.load_directory(dir.path());
    EXPECT_EQ(registry.find("terse").system_text, "Translate into {language_name}. One line.");
    EXPECT_EQ(registry.find("terse").render("Bribri"), "Translate into Bribri. One line.");
    EXPECT_EQ(resolve_template(registry, builtin_profile(Language::grn)).system_text,
              "Custom Guaraní prompt for Guaraní.");
    EXPECT_FALSE(registry.contains("notes"));

    ragmt::testing::write_text(dir / "bad.txt", std::string("\xff\xfe", 2));
    EXPECT_THROW(registry.load_file(dir / "bad.txt"), Error);
    EXPECT_THROW(registry.load_file(dir / "absent.txt"), Error);
}

TEST(Assemble, LayoutAndCounts) {
    const auto dev = small_dev();
    const PromptTemplate tmpl = resolve_template(TemplateRegistry::builtin(), builtin_profile(Language::grn));
    const auto dev_block = select_dev_exemplars(dev, 2);
    const RetrievedSet retrieved = retrieved_of({{7, "Un gato duerme.", "Peteĩ mbarakaja oke."}});
    const AssembledPrompt prompt = assemble(tmpl, dev_block, retrieved, "Una niña lleva flores.");

    EXPECT_EQ(prompt.user_text,
              "Development exemplars:\n"
              "ES: Una mujer teje una canasta. ||| TGT: Peteĩ kuña ojapo ajaka.\n"
              "ES: Un perro corre en el campo. ||| TGT: Peteĩ jagua oñani ñúme.\n"
              "\n"
              "Retrieved examples:\n"
              "ES: Un gato duerme. ||| TGT: Peteĩ mbarakaja oke.\n"
              "\n"
              "ES: Una niña lleva flores.\n"
              "TGT:");
    EXPECT_EQ(prompt.system_text, tmpl.system_text);
    EXPECT_EQ(prompt.dev_block_count, 2u);
    EXPECT_EQ(prompt.retrieved_block_count, 1u);
    EXPECT_EQ(count_exemplar_lines(prompt.user_text), 3u);
    EXPECT_EQ(extract_query(prompt.user_text), "Una niña lleva flores.");
    const std::size_t chars =
        unicode::codepoint_count(prompt.system_text) + unicode::codepoint_count(prompt.user_text);
    EXPECT_EQ(prompt.token_estimate, (chars + 3) / 4);
}

TEST(Assemble, ZeroShotIsOnlyTheStub) {
    const PromptTemplate tmpl = resolve_template(TemplateRegistry::builtin(), builtin_profile(Language::yua));
    const AssembledPrompt prompt = assemble(tmpl, {}, RetrievedSet{}, "Un perro.");
    EXPECT_EQ(prompt.user_text, "ES: Un perro.\nTGT:");
    EXPECT_EQ(count_exemplar_lines(prompt.user_text), 0u);
}

TEST(Assemble, RejectsBadQueries) {
    const PromptTemplate tmpl = TemplateRegistry::builtin().find("standard");
    EXPECT_THROW(assemble(tmpl, {}, RetrievedSet{}, "  "), Error);
    EXPECT_THROW(assemble(tmpl, {}, RetrievedSet{}, "a\nb"), Error);
    const RetrievedSet broken = retrieved_of({{0, "a", "b\nc", Origin::train}});
    EXPECT_THROW(assemble(tmpl, {}, broken, "q"), Error);
}

TEST(Assemble, ExemplarTextsAppearVerbatim) {
    ragmt::testing::Rng rng(77);
    const PromptTemplate tmpl = TemplateRegistry::builtin().find("standard");
    for (int trial = 0; trial < 50; ++trial) {
        const auto dev = ragmt::testing::dev_set(rng(), 1 + rng() % 20);
        const auto dev_block = select_dev_exemplars(dev, rng() % (dev.size() + 1));
        std::vector<ParallelPair> pairs;
        for (std::size_t i = 0, n = rng() % 30; i < n; ++i) {
            pairs.push_back({i, ragmt::testing::spanish_caption(rng), ragmt::testing::guarani_caption(rng)});
        }
        const RetrievedSet retrieved = retrieved_of(pairs);
        const std::string query = ragmt::testing::spanish_caption(rng);
        const AssembledPrompt prompt = assemble(tmpl, dev_block, retrieved, query);

        EXPECT_EQ(count_exemplar_lines(prompt.user_text), dev_block.size() + pairs.size());
        EXPECT_EQ(extract_query(prompt.user_text), query);
        EXPECT_EQ(prompt, assemble(tmpl, dev_block, retrieved, query));
        std::size_t last = 0;
        for (const ParallelPair& pair : dev_block) {
            const std::size_t at = prompt.user_text.find("ES: " + pair.source_es + " ||| TGT: " + pair.target + "\n", last);
            ASSERT_NE(at, std::string::npos);
            last = at;
        }
        for (const ScoredPair& entry : retrieved.entries) {
            const std::size_t at =
                prompt.user_text.find("ES: " + entry.pair.source_es + " ||| TGT: " + entry.pair.target + "\n", last);
            ASSERT_NE(at, std::string::npos);
            last = at;
        }
        EXPECT_LT(last, prompt.user_text.rfind("ES: " + query + "\nTGT:"));
    }
}

TEST(Assemble, Snapshot) {
    const PromptTemplate tmpl = resolve_template(TemplateRegistry::builtin(), builtin_profile(Language::bzd));
    const auto dev = small_dev();
    const auto dev_block = select_dev_exemplars(dev, 3, "d1", true);
    const RetrievedSet retrieved =
        retrieved_of({{12, "Una mujer con una canasta.", "Alà kué tsàtkö"}, {3, "Un perro negro.", "Chìchi dawö"}});
    const AssembledPrompt prompt = assemble(tmpl, dev_block, retrieved, "Una mujer camina con su perro.");
    expect_snapshot("prompt_bzd.txt", "[system]\n" + prompt.system_text + "\n[user]\n" + prompt.user_text + "\n");
}
