#include "ptkit/eval.hpp"

namespace ptkit::eval {

namespace {

using M = MetricKind;
using K = TaskKind;
using O = Origin;
using A = AnswerMode;

const std::vector<RegistryEntry> kRegistry = {
    {"AG News", O::translated, K::multiclass, 4, M::accuracy, 25.0, 100.0, true, 282.34, 120000, 7600, 12, A::rank},
    {"ASSIN 2 RTE", O::native, K::binary, 2, M::f1_binary, 50.0, 100.0, true, 139.99, 6500, 2448, 18, A::rank},
    {"ASSIN 2 STS", O::native, K::regression, 0, M::pearson, 0.0, 100.0, true, 139.99, 6500, 2448, 15, A::generate},
    {"BLUEX", O::native, K::multichoice, 4, M::accuracy, 25.0, 100.0, false, 1228.08, std::nullopt, 178, 1, A::rank},
    {"BoolQ", O::translated, K::binary, 2, M::accuracy, 50.0, 100.0, true, 562.30, 9427, 3270, 4, A::rank},
    {"ENEM Challenge", O::native, K::multichoice, 5, M::accuracy, 20.0, 100.0, false, 1286.68, std::nullopt, 916, 1, A::rank},
    {"ENEM 2022", O::native, K::multichoice, 5, M::accuracy, 20.0, 100.0, false, 1170.24, std::nullopt, 118, 1, A::rank},
    {"FaQuAD", O::native, K::extractive_qa, 0, M::token_f1, 0.0, 100.0, false, 1056.47, std::nullopt, 63, 4, A::generate},
    {"IMDB", O::translated, K::binary, 2, M::accuracy, 50.0, 100.0, true, 1114.56, 25000, 25000, 2, A::rank},
    {"MASSIVE", O::translated, K::multiclass, 18, M::f1_macro, 0.58, 100.0, true, 68.35, 11514, 2974, 36, A::rank},
    {"MKQA", O::translated, K::extractive_qa, 0, M::token_f1, 0.0, 100.0, false, 80.32, std::nullopt, 10000, 40, A::rank},
    {"SST2", O::translated, K::binary, 2, M::accuracy, 50.0, 100.0, true, 84.19, 67349, 872, 34, A::rank},
    {"TweetSentBR", O::native, K::multiclass, 3, M::f1_macro, 32.4, 100.0, true, 93.32, 12990, 2010, 30, A::rank},
    {"WSC", O::translated, K::binary, 2, M::accuracy, 50.0, 100.0, false, 102.15, std::nullopt, 285, 18, A::rank},
};

} // namespace

const std::vector<RegistryEntry> &poeta_registry()
{
    return kRegistry;
}

const RegistryEntry *find_registry_entry(std::string_view name)
{
    for (const auto &e : kRegistry) {
        if (e.name == name) {
            return &e;
        }
    }
    return nullptr;
}

TaskSpec task_from_registry(const RegistryEntry &entry)
{
    TaskSpec t;
    t.name = entry.name;
    t.origin = entry.origin;
    t.kind = entry.kind;
    t.num_classes = entry.num_classes;
    t.metric = entry.metric;
    t.random_score = entry.random_score;
    t.high_score = entry.high_score;
    t.balanced_shots = entry.balanced_shots;
    t.default_num_shots = entry.num_shots;
    t.answer_mode = entry.answer_mode;
    return t;
}

} // namespace ptkit::eval
