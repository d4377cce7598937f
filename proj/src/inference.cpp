#include "moodshift/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "moodshift/error.hpp"
#include "moodshift/random.hpp"
#include "moodshift/wav.hpp"

namespace moodshift {

using nlohmann::json;

std::size_t bank_selection_size(std::size_t bin_size, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw ContractError("bank selection fraction must be in (0, 1]");
    // Guard against p * n landing a hair above an integer through rounding.
    const double raw = p * static_cast<double>(bin_size);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return std::clamp<std::size_t>(k, bin_size == 0 ? 0 : 1, bin_size);
}

EmbeddingBank EmbeddingBank::build(std::span<const BankMember> members, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw ContractError("bank selection fraction must be in (0, 1]");
    if (members.empty()) throw ContractError("cannot build an embedding bank from no references");
    EmbeddingBank bank;
    bank.p_ = p;
    bank.dim_ = members.front().embedding.size();

    std::map<int, std::vector<const BankMember*>> bins;
    for (const auto& m : members) {
        if (m.embedding.size() != bank.dim_) throw ContractError("bank references have unequal embedding sizes");
        bins[ArousalLabel(m.arousal).bin()].push_back(&m);
    }
    for (auto& [bin, list] : bins) {
        std::sort(list.begin(), list.end(), [bin](const BankMember* a, const BankMember* b) {
            const double da = std::abs(a->arousal - bin);
            const double db = std::abs(b->arousal - bin);
            if (da != db) return da < db;
            return a->utterance_id < b->utterance_id;
        });
        BankEntry entry;
        entry.bin = bin;
        entry.bin_size = list.size();
        const std::size_t k = bank_selection_size(list.size(), p);
        entry.embedding = Vector::Zero(bank.dim_);
        for (std::size_t i = 0; i < k; ++i) {
            entry.embedding += list[i]->embedding;
            entry.provenance.push_back(list[i]->utterance_id);
        }
        entry.embedding /= static_cast<double>(k);
        bank.entries_.emplace(bin, std::move(entry));
    }
    return bank;
}

BankLookup EmbeddingBank::lookup(double target_arousal, bool allow_fallback) const {
    const int bin = ArousalLabel(target_arousal).bin();
    BankLookup out;
    out.requested_bin = bin;
    if (auto it = entries_.find(bin); it != entries_.end()) {
        out.entry = &it->second;
        return out;
    }
    if (!allow_fallback || entries_.empty()) {
        std::string populated;
        for (const auto& [b, e] : entries_) populated += (populated.empty() ? "" : ",") + std::to_string(b);
        throw MissingBinError("embedding bank has no references for arousal bin " + std::to_string(bin) +
                              " (populated bins: " + (populated.empty() ? "none" : populated) + ")");
    }
    const BankEntry* best = nullptr;
    for (const auto& [b, e] : entries_) {
        if (!best || std::abs(b - bin) < std::abs(best->bin - bin)) best = &e;
    }
    out.entry = best;
    out.fallback = true;
    return out;
}

void EmbeddingBank::save(const std::filesystem::path& path) const {
    json entries = json::array();
    for (const auto& [bin, e] : entries_) {
        entries.push_back({{"bin", bin},
                           {"bin_size", e.bin_size},
                           {"provenance", e.provenance},
                           {"embedding", std::vector<double>(e.embedding.data(), e.embedding.data() + e.embedding.size())}});
    }
    const json doc = {{"format", "moodshift-embedding-bank"},
                      {"version", 1},
                      {"p", p_},
                      {"dim", dim_},
                      {"membership", "label rounds to bin"},
                      {"ranking", "|label - bin| ascending, then utterance id"},
                      {"entries", entries}};
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << doc.dump(1) << '\n';
}

EmbeddingBank EmbeddingBank::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    try {
        const json doc = json::parse(is);
        if (doc.at("format") != "moodshift-embedding-bank" || doc.at("version") != 1) {
            throw FormatError(path.string() + " is not a version 1 embedding bank");
        }
        EmbeddingBank bank;
        bank.p_ = doc.at("p").get<double>();
        bank.dim_ = doc.at("dim").get<Eigen::Index>();
        for (const auto& e : doc.at("entries")) {
            BankEntry entry;
            entry.bin = e.at("bin").get<int>();
            entry.bin_size = e.at("bin_size").get<std::size_t>();
            entry.provenance = e.at("provenance").get<std::vector<std::string>>();
            const auto v = e.at("embedding").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(v.size()) != bank.dim_) throw FormatError("bank entry has wrong dimension");
            entry.embedding = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
            bank.entries_.emplace(entry.bin, std::move(entry));
        }
        return bank;
    } catch (const json::exception& e) {
        throw FormatError("malformed embedding bank " + path.string() + ": " + e.what());
    }
}

bool EmbeddingBank::operator==(const EmbeddingBank& other) const {
    if (p_ != other.p_ || dim_ != other.dim_ || entries_.size() != other.entries_.size()) return false;
    for (const auto& [bin, e] : entries_) {
        auto it = other.entries_.find(bin);
        if (it == other.entries_.end()) return false;
        const BankEntry& o = it->second;
        if (e.bin_size != o.bin_size || e.provenance != o.provenance || e.embedding != o.embedding) return false;
    }
    return true;
}

std::vector<BankMember> collect_bank_members(const std::filesystem::path& manifest_path,
                                             const std::vector<UtteranceRecord>& records,
                                             const EmotionEncoder& encoder, const MelConfig& mel_config,
                                             std::vector<std::string>* warnings) {
    std::vector<BankMember> out;
    for (const auto& r : records) {
        try {
            const Waveform wave = read_wav(resolve_audio_path(manifest_path, r));
            const MelSpectrogram mel = mel_extract(wave.samples, mel_config);
            out.push_back({r.utterance_id, r.arousal.value(), encoder.encode(r.utterance_id, mel).vector()});
        } catch (const Error& e) {
            if (warnings) warnings->push_back("skipping '" + r.utterance_id + "': " + e.what());
        }
    }
    return out;
}

Matrix reverse_solve(const Matrix& y, const ScoreFn& score, const NoiseSchedule& schedule,
                     const SolverConfig& config) {
    if (config.n_steps < 1) throw ContractError("reverse_solve needs at least one step");
    Rng rng(config.seed);
    const double t_end = schedule.t_min();
    const double dt = (1.0 - t_end) / config.n_steps;
    Matrix x = y + schedule.sigma(1.0) * standard_normal(y.rows(), y.cols(), rng);
    for (int k = 0; k < config.n_steps; ++k) {
        const double t = 1.0 - k * dt;
        const double beta = schedule.beta(t);
        const Matrix s = score(x, t);
        const double g = config.printed_diffusion ? beta : std::sqrt(beta);
        const Matrix drift = 0.5 * beta * (y - x) - g * g * s;
        x = x - drift * dt + std::sqrt(dt) * g * standard_normal(y.rows(), y.cols(), rng);
        if (!all_finite(x)) {
            throw DivergenceError("reverse SDE state became non-finite at step " + std::to_string(k + 1) + " of " +
                                  std::to_string(config.n_steps) + " (t = " + std::to_string(t - dt) + ")");
        }
    }
    return x;
}

MelSpectrogram reverse_solve(const MelSpectrogram& y, const Vector& speaker, const Vector& emotion,
                             const ScoreModel& model, const SolverConfig& config) {
    ConditioningBundle cond{y.values(), speaker, emotion, 1.0};
    const ScoreFn fn = [&](const Matrix& x, double t) {
        cond.t = t;
        return model.evaluate(x, cond);
    };
    return MelSpectrogram(reverse_solve(y.values(), fn, model.schedule(), config), y.frame_rate());
}

ConversionResult convert(const MelSpectrogram& x0, const UtteranceRecord& source, const ArousalLabel& target,
                         const EmbeddingBank& bank, const EncoderSet& encoders, const ScoreModel& model,
                         const ConversionOptions& options) {
    const BankLookup hit = bank.lookup(target.value(), options.allow_bin_fallback);
    MelSpectrogram y = encoders.phoneme->encode(x0);
    const SpeakerEmbedding speaker = encoders.speaker->encode(source);
    MelSpectrogram out = reverse_solve(y, speaker.vector(), hit.entry->embedding, model, options.solver);

    ConversionMetadata meta;
    meta.utterance_id = source.utterance_id;
    meta.target_arousal = target.value();
    meta.requested_bin = hit.requested_bin;
    meta.used_bin = hit.entry->bin;
    meta.fallback = hit.fallback;
    meta.seed = options.solver.seed;
    meta.n_steps = options.solver.n_steps;
    meta.printed_diffusion = options.solver.printed_diffusion;
    meta.bank_provenance = hit.entry->provenance;
    return {std::move(out), std::move(y), hit.entry->embedding, std::move(meta)};
}

}  // namespace moodshift
