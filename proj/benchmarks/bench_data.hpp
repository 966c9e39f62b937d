#pragma once

#include "ptkit/bpe.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace bench {

inline const std::filesystem::path kData = PTKIT_BENCH_DATA;

inline std::shared_ptr<const ptkit::bpe::Tokenizer> gpt2()
{
    static const auto tok = std::make_shared<const ptkit::bpe::Tokenizer>(
        ptkit::bpe::Tokenizer::load(kData / "gpt2/vocab.json", kData / "gpt2/merges.txt"));
    return tok;
}

inline std::string fixture_text()
{
    std::ifstream in(kData / "corpus/fixture.jsonl", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace bench
