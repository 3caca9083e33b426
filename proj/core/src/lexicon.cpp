// Closed part-of-speech word list for the scene-graph parser. Vocabulary is
// tuned to street/surveillance captions of infrared-visible scenes.

#include <algorithm>
#include <cctype>
#include <initializer_list>

#include "msgf/error.hpp"
#include "msgf/textsg.hpp"

namespace msgf {

namespace {

constexpr std::initializer_list<const char*> kDeterminers = {
    "a", "an", "the", "this", "that", "these", "those", "some", "its", "their", "his",
    "several", "many", "few", "each", "every", "another", "other", "any", "all", "no"};

constexpr std::initializer_list<std::pair<const char*, int>> kNumerals = {
    {"one", 1},  {"two", 2},   {"three", 3},  {"four", 4},  {"five", 5},   {"six", 6},
    {"seven", 7}, {"eight", 8}, {"nine", 9},   {"ten", 10},  {"eleven", 11}, {"twelve", 12},
    {"both", 2},  {"pair", 2}};

constexpr std::initializer_list<const char*> kPronouns = {"it", "he", "she", "they", "him",
                                                          "her", "them", "itself"};

constexpr std::initializer_list<const char*> kConjunctions = {"and", "or", "but", "while",
                                                              "whereas", "then"};

constexpr std::initializer_list<const char*> kPrepositions = {
    "on",         "in",         "near",       "beside",     "behind",     "under",
    "above",      "below",      "over",       "at",         "by",         "next",
    "to",         "of",         "with",       "along",      "across",     "through",
    "from",       "between",    "front",      "inside",     "outside",    "into",
    "onto",       "toward",     "towards",    "around",     "against",    "beneath",
    "underneath", "opposite",   "among",      "within",     "beyond",     "past",
    "without",    "atop",       "upon"};

constexpr std::initializer_list<const char*> kCopulas = {
    "is", "are", "was", "were", "be", "being", "been", "appears", "appear", "looks", "look",
    "seems", "seem", "remains", "remain"};

constexpr std::initializer_list<const char*> kVerbs = {
    "has",          "have",         "holds",        "holding",      "walking",
    "walks",        "walk",         "riding",       "rides",        "ride",
    "standing",     "stands",       "stand",        "sitting",      "sits",
    "sit",          "parked",       "driving",      "drives",       "drive",
    "crossing",     "crosses",      "cross",        "running",      "runs",
    "run",          "carrying",     "carries",      "carry",        "wearing",
    "wears",        "wear",         "looking",      "watching",     "watches",
    "waiting",      "waits",        "moving",       "moves",        "stopped",
    "lying",        "lies",         "leaning",      "leans",        "hanging",
    "hangs",        "covered",      "surrounded",   "lit",          "shining",
    "shines",       "facing",       "faces",        "approaching",  "approaches",
    "passing",      "passes",       "following",    "follows",      "glowing",
    "glows",        "emitting",     "emits",        "casting",      "casts",
    "pushing",      "pushes",       "pulling",      "pulls",        "using",
    "uses",         "talking",      "talks",        "located",      "placed",
    "reflected",    "reflecting",   "illuminating", "illuminates",  "blocking",
    "blocks",       "entering",     "enters",       "leaving",      "leaves",
    "heading",      "heads",        "turning",      "turns",        "lined",
    "filled",       "contains",     "containing",   "shows",        "showing",
    "depicts",      "depicting",    "reveals",      "revealing",    "stretches",
    "stretching",   "surrounds",    "surrounding",  "touching",     "touches",
    "chasing",      "chases",       "playing",      "plays",        "hiding",
    "hides",        "seen",         "captured",     "taken",        "opens",
    "opening",      "chase",        "stops",        "stopping",     "hold",
    "climbing",     "climbs",       "eating",       "eats",         "sleeping",     "sleeps"};

constexpr std::initializer_list<const char*> kAdjectives = {
    "red",         "blue",        "green",       "yellow",      "white",       "black",
    "silver",      "gray",        "grey",        "dark",        "bright",      "orange",
    "brown",       "pink",        "purple",      "golden",      "big",         "small",
    "large",       "tall",        "short",       "long",        "wide",        "narrow",
    "tiny",        "huge",        "hot",         "warm",        "cold",        "cool",
    "wet",         "dry",         "empty",       "crowded",     "busy",        "quiet",
    "old",         "new",         "young",       "distant",     "blurry",      "clear",
    "dim",         "illuminated", "shadowed",    "nighttime",   "daytime",     "thermal",
    "infrared",    "low",         "high",        "heavy",       "thick",       "thin",
    "faint",       "strong",      "weak",        "sharp",       "soft",        "smooth",
    "rough",       "textured",    "metallic",    "wooden",      "concrete",    "paved",
    "open",        "closed",      "straight",    "curved",      "rear",        "upper",
    "lower",       "main",        "single",      "lone",        "foggy",       "misty",
    "rainy",       "snowy",       "cloudy",      "sunny",       "dusty",       "cluttered",
    "distinct",    "salient",     "prominent",   "overall",     "entire",      "whole",
    "central",     "middle",      "left",        "right",       "striped",     "colorful",
    "visible",     "pale",        "vivid",       "bare",        "leafy",       "dense",
    "sparse",      "shiny",       "bouncy",      "fast",        "slow"};

constexpr std::initializer_list<const char*> kAdverbs = {
    "slowly",    "quickly",   "very",      "also",      "together",  "there",     "here",
    "nearby",    "not",       "too",       "still",     "only",      "just",      "almost",
    "partly",    "partially", "fully",     "clearly",   "brightly",  "dimly",     "side",
    "away"};

// Singular noun lemmas; regular plurals are derived by suffix.
constexpr std::initializer_list<const char*> kNouns = {
    "person",       "man",          "woman",        "child",        "pedestrian",
    "girl",         "boy",          "car",          "vehicle",      "bus",
    "truck",        "van",          "taxi",         "bicycle",      "bike",
    "motorcycle",   "motorbike",    "scooter",      "cyclist",      "rider",
    "driver",       "tree",         "road",         "street",       "sidewalk",
    "pavement",     "building",     "house",        "window",       "light",
    "lamp",         "streetlight",  "headlight",    "taillight",    "pole",
    "sign",         "fence",        "wall",         "sky",          "grass",
    "bush",         "dog",          "cat",          "bag",          "backpack",
    "umbrella",     "crosswalk",    "lane",         "bench",        "door",
    "wheel",        "shadow",       "scene",        "image",        "area",
    "region",       "background",   "foreground",   "night",        "intersection",
    "corner",       "field",        "river",        "bridge",       "boat",
    "smoke",        "helmet",       "jacket",       "coat",         "shirt",
    "hat",          "lot",          "parking",      "traffic",      "curb",
    "roof",         "ground",       "path",         "trail",        "hill",
    "forest",       "water",        "shop",         "store",        "station",
    "platform",     "track",        "train",        "gate",         "post",
    "plant",        "flower",       "leaf",         "branch",       "trunk",
    "body",         "head",         "arm",          "leg",          "face",
    "figure",       "target",       "object",       "structure",    "column",
    "stair",        "step",         "glass",        "reflection",   "puddle",
    "line",         "marking",      "zebra",        "cone",         "barrier",
    "billboard",    "screen",       "camera",       "box",          "bin",
    "container",    "soldier",      "guard",        "crowd",        "group",
    "edge",         "top",          "bottom",       "center",       "distance",
    "view",         "environment",  "city",         "town",         "yard",
    "garden",       "park",         "roadside",     "highway",      "alley",
    "sedan",        "suv",          "motorist",     "walker",       "jogger",
    "runner",       "animal",       "horse",        "bird",         "cloud",
    "moon",         "sun",          "fog",          "rain",         "snow",
    "heat",         "texture",      "detail",       "contour",      "outline",
    "silhouette",   "mark",         "spot"};

constexpr std::initializer_list<std::pair<const char*, const char*>> kIrregularPlurals = {
    {"people", "person"}, {"men", "man"},     {"women", "woman"}, {"children", "child"},
    {"feet", "foot"},   {"mice", "mouse"},  {"geese", "goose"},
    {"bodies", "body"},   {"pedestrians", "pedestrian"}};

bool has_suffix(const std::string& w, const std::string& s) {
  return w.size() > s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0;
}

}  // namespace

const char* pos_name(Pos p) {
  switch (p) {
    case Pos::noun: return "noun";
    case Pos::adj: return "adj";
    case Pos::verb: return "verb";
    case Pos::prep: return "prep";
    case Pos::det: return "det";
    case Pos::num: return "num";
    case Pos::pron: return "pron";
    case Pos::conj: return "conj";
    case Pos::adv: return "adv";
  }
  return "?";
}

Lexicon::Lexicon() {
  auto add = [this](const std::string& w, LexEntry e) {
    if (entries_.count(w)) throw ContractError("lexicon word '" + w + "' listed twice");
    entries_.emplace(w, std::move(e));
  };
  for (const char* w : kDeterminers) add(w, {Pos::det, w});
  for (const auto& [w, n] : kNumerals) add(w, {Pos::num, w, false, n});
  for (const char* w : kPronouns) add(w, {Pos::pron, w});
  for (const char* w : kConjunctions) add(w, {Pos::conj, w});
  for (const char* w : kPrepositions) add(w, {Pos::prep, w});
  for (const char* w : kCopulas) add(w, {Pos::verb, w, false, 0, true});
  for (const char* w : kVerbs) add(w, {Pos::verb, w});
  for (const char* w : kAdjectives) add(w, {Pos::adj, w});
  for (const char* w : kAdverbs) add(w, {Pos::adv, w});
  for (const char* w : kNouns) {
    add(w, {Pos::noun, w});
    noun_singulars_.emplace(w, w);
  }
  for (const auto& [plural, singular] : kIrregularPlurals) add(plural, {Pos::noun, singular, true});
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lex;
  return lex;
}

LexEntry Lexicon::tag(const std::string& word) const {
  if (auto it = entries_.find(word); it != entries_.end()) return it->second;

  auto plural_of = [&](const std::string& stem) -> std::optional<LexEntry> {
    if (noun_singulars_.count(stem)) return LexEntry{Pos::noun, stem, true};
    return std::nullopt;
  };
  if (has_suffix(word, "ies"))
    if (auto e = plural_of(word.substr(0, word.size() - 3) + "y")) return *e;
  if (has_suffix(word, "es"))
    if (auto e = plural_of(word.substr(0, word.size() - 2))) return *e;
  if (has_suffix(word, "s"))
    if (auto e = plural_of(word.substr(0, word.size() - 1))) return *e;

  if (!word.empty() && std::all_of(word.begin(), word.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      })) {
    const int n = word.size() > 6 ? 1000000 : std::stoi(word);
    return {Pos::num, word, false, n, false, true};
  }

  // Fallback rules for open-class words outside the list.
  LexEntry e;
  e.known = false;
  e.lemma = word;
  if (has_suffix(word, "ing") || has_suffix(word, "ed")) {
    e.pos = Pos::verb;
  } else if (has_suffix(word, "ly")) {
    e.pos = Pos::adv;
  } else {
    e.pos = Pos::noun;
    if (has_suffix(word, "s") && !has_suffix(word, "ss") && word.size() > 3) {
      e.plural = true;
      e.lemma = word.substr(0, word.size() - 1);
    }
  }
  return e;
}

std::vector<std::string> Lexicon::words() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& kv : entries_) out.push_back(kv.first);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace msgf
