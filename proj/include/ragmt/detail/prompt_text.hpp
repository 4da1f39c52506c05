#pragma once

// Shipped instruction texts. Kept apart from promptkit.hpp so that the
// builtin language profiles can reference the morphological block without
// pulling in prompt assembly.

#include <string_view>

namespace ragmt::detail {

inline constexpr std::string_view kStandardSystemText =
    "You are an expert translator from Spanish into {language_name}.\n"
    "Translate the Spanish image caption into {language_name}.\n"
    "Match the style of the example translations: short, descriptive captions.\n"
    "Stay concise. Do not add information that is not in the Spanish caption.\n"
    "Preserve culturally specific nouns and proper names when appropriate.\n"
    "Output exactly one line containing only the {language_name} caption.";

inline constexpr std::string_view kMorphologicalBlock =
    "Bribri grammar notes:\n"
    "- Use Subject-Object-Verb (SOV) word order; the verb comes last in the clause.\n"
    "- Keep clauses verb-final, including subordinate clauses.\n"
    "- Write tonal diacritics exactly as in the examples: high tone (acute), falling tone (grave),\n"
    "  nasal vowels (underline) and circumflex vowels; never drop or replace a tone mark.\n"
    "- Reproduce common consonant clusters as they are spelled in the examples (tk, tch, dk, ñ).\n"
    "- Mark possession with a possessive prefix on the noun (for example ye' 'my', be' 'your',\n"
    "  ie' 'his/her') instead of a separate word.";

// Small culture glossaries for the Wixarika ablation prompts.
inline constexpr std::string_view kWixarikaGlossaryV2 =
    "Glossary of Wixarika cultural terms (Wixarika: Spanish definition):\n"
    "- hikuri: peyote, cacto sagrado\n"
    "- mara'akame: chaman, cantador de ceremonias\n"
    "- tukipa: centro ceremonial comunitario\n"
    "- nierika: tabla de estambre, objeto ritual para ver\n"
    "- tsikiri: ojo de dios tejido con estambre\n"
    "- muwieri: flecha de plumas del chaman";

inline constexpr std::string_view kWixarikaGlossaryV3 =
    "Glossary of Wixarika cultural terms (Wixarika: Spanish definition).\n"
    "Use a term only when the Spanish caption describes that object.\n"
    "- hikuri: peyote, cacto sagrado\n"
    "- mara'akame: chaman, cantador de ceremonias\n"
    "- tukipa: centro ceremonial comunitario\n"
    "- xiriki: adoratorio familiar\n"
    "- nierika: tabla de estambre, objeto ritual para ver\n"
    "- tsikiri: ojo de dios tejido con estambre\n"
    "- muwieri: flecha de plumas del chaman\n"
    "- takwatsi: cesto de palma del chaman\n"
    "- kuka: chaquira, cuentas de colores\n"
    "- xukuri: jicara ceremonial\n"
    "- tewari: persona mestiza, no wixarika";

} // namespace ragmt::detail
