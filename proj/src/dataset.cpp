#include "ambiup/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "ambiup/wav.hpp"

namespace ambiup {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

// Purpose tags for per-pair derived RNG streams. Selection (files) is stream 1
// and is skipped when regenerating from a manifest record.
enum StreamTag : std::uint64_t { kSelect = 1, kWindow = 2, kIr = 3, kPlace = 4 };

std::vector<std::string> list_wavs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".wav")
            out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error("no .wav files in " + dir);
    return out;
}

// Cuts or tail-pads a stem to exactly pair_len samples. The window offset is
// drawn here so regeneration replays it from the window stream.
AudioBuffer window_stem(const AudioBuffer& stem, std::size_t pair_len, Pcg64& rng,
                        std::size_t* offset_out) {
    const std::size_t len = stem.num_samples();
    std::size_t offset = 0;
    if (len > pair_len) offset = rng.uniform_int(len - pair_len + 1);
    *offset_out = offset;

    AudioBuffer out;
    out.sample_rate = stem.sample_rate;
    for (const auto& ch : stem.channels) {
        std::vector<double> cut(pair_len, 0.0);
        const std::size_t n = std::min(pair_len, len - offset);
        std::copy(ch.begin() + static_cast<std::ptrdiff_t>(offset),
                  ch.begin() + static_cast<std::ptrdiff_t>(offset + n), cut.begin());
        out.channels.push_back(std::move(cut));
    }
    return out;
}

std::string pair_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pair_%06zu", index);
    return buf;
}

json placement_to_json(const SourcePlacement& p) {
    return json{{"azimuth", p.azimuth}, {"width", p.width}, {"offset", p.offset}};
}

SourcePlacement placement_from_json(const json& j) {
    SourcePlacement p;
    p.azimuth = j.at("azimuth").get<double>();
    p.width = j.at("width").get<double>();
    p.offset = j.at("offset").get<std::size_t>();
    return p;
}

}  // namespace

void TrainingPair::validate() const {
    stereo.validate();
    bformat.validate();
    if (!stereo.is_stereo()) throw std::invalid_argument("TrainingPair: stereo side must have 2 channels");
    if (stereo.num_samples() != bformat.num_samples())
        throw std::invalid_argument("TrainingPair: stereo/bformat lengths differ");
    if (stereo.sample_rate != bformat.sample_rate)
        throw std::invalid_argument("TrainingPair: sample rates differ");
}

PlacedEncoding place_and_encode(const std::vector<AudioBuffer>& stems, const AmbisonicIR& ir,
                                const AugmentationChain& chain, Pcg64& rng) {
    if (stems.empty()) throw std::invalid_argument("place_and_encode: empty stem list");
    std::size_t longest = 0;
    for (const auto& s : stems) {
        s.validate();
        if (s.sample_rate != ir.sample_rate)
            throw std::invalid_argument("place_and_encode: stem/IR sample rates differ");
        longest = std::max(longest, s.num_samples());
    }

    PlacedEncoding result;
    std::vector<BFormat> contributions;
    for (const auto& stem : stems) {
        SourcePlacement placement;
        placement.azimuth = rng.uniform(-kPi, kPi);
        if (stem.is_stereo()) placement.width = rng.uniform(0.0, kPi);
        const ChainDraws draws = draw_chain(chain, rng);

        if (stem.is_stereo()) {
            // Left of center is counterclockwise (+width/2).
            const AudioBuffer left = AudioBuffer::mono(stem.channels[0], stem.sample_rate);
            const AudioBuffer right = AudioBuffer::mono(stem.channels[1], stem.sample_rate);
            contributions.push_back(encode_source(
                apply_chain_with(left, draws), ir,
                Azimuth(placement.azimuth + 0.5 * placement.width)));
            contributions.push_back(encode_source(
                apply_chain_with(right, draws), ir,
                Azimuth(placement.azimuth - 0.5 * placement.width)));
        } else if (stem.is_mono()) {
            contributions.push_back(
                encode_source(apply_chain_with(stem, draws), ir, Azimuth(placement.azimuth)));
        } else {
            throw std::invalid_argument("place_and_encode: stems must be mono or stereo");
        }
        result.placements.push_back(placement);
    }

    BFormat mixed = mix_bformat(contributions);
    mixed.w.resize(longest);
    mixed.x.resize(longest);
    mixed.y.resize(longest);
    result.bformat = std::move(mixed);
    return result;
}

AudioBuffer render_virtual_stereo(const BFormat& bf) {
    bf.validate();
    const double c = std::cos(kVirtualLeftAzimuth);
    const double s = std::sin(kVirtualLeftAzimuth);
    const std::size_t n = bf.num_samples();
    std::vector<double> left(n), right(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dipole = bf.x[i] * c + bf.y[i] * s;
        left[i] = bf.w[i] + dipole;
        right[i] = bf.w[i] - dipole;  // the speaker pi radians away
    }
    return AudioBuffer::stereo(std::move(left), std::move(right), bf.sample_rate);
}

TrainingPair crop_pair(const TrainingPair& pair, std::size_t crop_len, Pcg64& rng) {
    pair.validate();
    const std::size_t len = pair.stereo.num_samples();
    if (len < crop_len) throw std::invalid_argument("crop_pair: pair shorter than crop length");

    const std::size_t offset = rng.uniform_int(len - crop_len + 1);
    const double gain = std::pow(10.0, rng.uniform(-6.0, 6.0) / 20.0);

    auto cut = [&](const std::vector<double>& ch) {
        std::vector<double> out(crop_len);
        for (std::size_t i = 0; i < crop_len; ++i) out[i] = ch[offset + i] * gain;
        return out;
    };

    TrainingPair out;
    out.stereo = AudioBuffer::stereo(cut(pair.stereo.channels[0]), cut(pair.stereo.channels[1]),
                                     pair.stereo.sample_rate);
    out.bformat = BFormat(pair.bformat.sample_rate, cut(pair.bformat.w), cut(pair.bformat.x),
                          cut(pair.bformat.y));
    out.crop_offset = pair.crop_offset + offset;
    out.seed = pair.seed;
    return out;
}

TrainingPair synthesize_pair(const std::vector<std::string>& stem_paths,
                             const std::string& ir_path, std::uint64_t pair_seed,
                             const CorpusConfig& config,
                             std::vector<SourcePlacement>* placements_out) {
    const auto pair_len =
        static_cast<std::size_t>(std::llround(config.pair_seconds * config.sample_rate));

    Pcg64 rng_window(derive_seed(pair_seed, kWindow));
    Pcg64 rng_ir(derive_seed(pair_seed, kIr));
    Pcg64 rng_place(derive_seed(pair_seed, kPlace));

    std::vector<AudioBuffer> stems;
    std::vector<std::size_t> offsets;
    for (const auto& path : stem_paths) {
        AudioBuffer stem = read_wav(path);
        if (stem.sample_rate != config.sample_rate)
            throw std::runtime_error("stem " + path + " is not at the corpus sample rate");
        std::size_t offset = 0;
        stems.push_back(window_stem(stem, pair_len, rng_window, &offset));
        offsets.push_back(offset);
    }

    AmbisonicIR ir = load_ir_wav(ir_path, config.sample_rate);
    ir = randomize_ir(ir, config.ir_spec, rng_ir);

    PlacedEncoding placed = place_and_encode(stems, ir, config.chain, rng_place);
    for (std::size_t i = 0; i < offsets.size(); ++i) placed.placements[i].offset = offsets[i];

    TrainingPair pair;
    pair.bformat = std::move(placed.bformat);
    pair.stereo = render_virtual_stereo(pair.bformat);
    pair.seed = pair_seed;
    pair.validate();
    if (placements_out) *placements_out = std::move(placed.placements);
    return pair;
}

Manifest synthesize_corpus(const CorpusConfig& config, std::uint64_t seed) {
    if (config.pair_seconds < 0.2)
        throw std::invalid_argument("synthesize_corpus: pair_seconds must be at least 0.2");
    const std::vector<std::string> stem_files = list_wavs(config.stem_dir);
    const std::vector<std::string> ir_files = list_wavs(config.ir_dir);
    fs::create_directories(config.out_dir);

    const auto n_pairs = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(config.total_hours * 3600.0 / config.pair_seconds)));

    Manifest manifest;
    manifest.sample_rate = config.sample_rate;
    manifest.records.resize(n_pairs);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_pairs || failed.load()) break;
            try {
                const std::uint64_t pair_seed = derive_seed(seed, i);
                Pcg64 rng_select(derive_seed(pair_seed, kSelect));

                const std::string ir_path = ir_files[rng_select.uniform_int(ir_files.size())];
                const std::size_t k =
                    std::min<std::size_t>(static_cast<std::size_t>(config.stems_per_pair),
                                          stem_files.size());
                std::vector<std::size_t> pool(stem_files.size());
                for (std::size_t j = 0; j < pool.size(); ++j) pool[j] = j;
                std::vector<std::string> stem_paths;
                for (std::size_t j = 0; j < k; ++j) {  // partial Fisher-Yates
                    const std::size_t pick = j + rng_select.uniform_int(pool.size() - j);
                    std::swap(pool[j], pool[pick]);
                    stem_paths.push_back(stem_files[pool[j]]);
                }

                ManifestRecord rec;
                rec.pair_id = pair_name(i);
                rec.stem_paths = stem_paths;
                rec.ir_path = ir_path;
                rec.seed = pair_seed;
                rec.crop_offset = 0;

                TrainingPair pair =
                    synthesize_pair(stem_paths, ir_path, pair_seed, config, &rec.placements);

                rec.stereo_path = (fs::path(config.out_dir) / (rec.pair_id + "_stereo.wav")).string();
                rec.bformat_path = (fs::path(config.out_dir) / (rec.pair_id + "_bformat.wav")).string();
                write_wav(rec.stereo_path, pair.stereo);
                AudioBuffer bf_audio;
                bf_audio.sample_rate = pair.bformat.sample_rate;
                bf_audio.channels = {pair.bformat.w, pair.bformat.x, pair.bformat.y};
                write_wav(rec.bformat_path, bf_audio);

                manifest.records[i] = std::move(rec);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                failed.store(true);
                if (error_message.empty()) error_message = e.what();
            }
        }
    };

    const int workers = std::max(1, config.workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < workers; ++t) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    if (failed.load()) throw std::runtime_error("synthesize_corpus: " + error_message);

    // 90/10 split by seeded shuffle; validation count is round(fraction * N).
    std::vector<std::size_t> order(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) order[i] = i;
    Pcg64 rng_split(derive_seed(seed, 0x5914E7ULL));
    for (std::size_t i = 0; i + 1 < n_pairs; ++i) {
        const std::size_t j = i + rng_split.uniform_int(n_pairs - i);
        std::swap(order[i], order[j]);
    }
    const auto n_val = static_cast<std::size_t>(
        std::llround(config.validation_fraction * static_cast<double>(n_pairs)));
    for (std::size_t i = 0; i < n_pairs; ++i) {
        auto& dst = (i < n_val) ? manifest.validation_ids : manifest.train_ids;
        dst.push_back(manifest.records[order[i]].pair_id);
    }
    std::sort(manifest.train_ids.begin(), manifest.train_ids.end());
    std::sort(manifest.validation_ids.begin(), manifest.validation_ids.end());

    // corpus.json is the manifest header: rate and on-disk channel order.
    json header{{"format_version", 1},
                {"sample_rate", config.sample_rate},
                {"pair_seconds", config.pair_seconds},
                {"num_pairs", n_pairs},
                {"seed", seed},
                {"bformat_channel_order", json::array({"W", "X", "Y"})}};
    std::ofstream hf(fs::path(config.out_dir) / "corpus.json");
    hf << header.dump(2) << "\n";

    std::ofstream mf(fs::path(config.out_dir) / "manifest.jsonl");
    for (const auto& rec : manifest.records) {
        json placements = json::array();
        for (const auto& p : rec.placements) placements.push_back(placement_to_json(p));
        json j{{"pair_id", rec.pair_id},
               {"stem_paths", rec.stem_paths},
               {"ir_path", rec.ir_path},
               {"placements", placements},
               {"seed", rec.seed},
               {"crop_offset", rec.crop_offset},
               {"output_paths", json{{"stereo", rec.stereo_path}, {"bformat", rec.bformat_path}}}};
        mf << j.dump() << "\n";
    }

    json split{{"train", manifest.train_ids}, {"validation", manifest.validation_ids}};
    std::ofstream sf(fs::path(config.out_dir) / "split.json");
    sf << split.dump(2) << "\n";

    return manifest;
}

Manifest load_manifest(const std::string& corpus_dir) {
    const fs::path dir(corpus_dir);
    std::ifstream hf(dir / "corpus.json");
    if (!hf) throw std::runtime_error("load_manifest: missing corpus.json in " + corpus_dir);
    json header = json::parse(hf);

    Manifest manifest;
    manifest.sample_rate = header.at("sample_rate").get<int>();

    std::ifstream mf(dir / "manifest.jsonl");
    if (!mf) throw std::runtime_error("load_manifest: missing manifest.jsonl in " + corpus_dir);
    std::string line;
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ManifestRecord rec;
        rec.pair_id = j.at("pair_id").get<std::string>();
        rec.stem_paths = j.at("stem_paths").get<std::vector<std::string>>();
        rec.ir_path = j.at("ir_path").get<std::string>();
        for (const auto& p : j.at("placements")) rec.placements.push_back(placement_from_json(p));
        rec.seed = j.at("seed").get<std::uint64_t>();
        rec.crop_offset = j.at("crop_offset").get<std::size_t>();
        rec.stereo_path = j.at("output_paths").at("stereo").get<std::string>();
        rec.bformat_path = j.at("output_paths").at("bformat").get<std::string>();
        manifest.records.push_back(std::move(rec));
    }

    std::ifstream sf(dir / "split.json");
    if (!sf) throw std::runtime_error("load_manifest: missing split.json in " + corpus_dir);
    json split = json::parse(sf);
    manifest.train_ids = split.at("train").get<std::vector<std::string>>();
    manifest.validation_ids = split.at("validation").get<std::vector<std::string>>();
    return manifest;
}

TrainingPair load_pair(const Manifest& manifest, const ManifestRecord& record) {
    AudioBuffer stereo = read_wav(record.stereo_path);
    AudioBuffer bf = read_wav(record.bformat_path);
    if (bf.num_channels() != 3)
        throw std::runtime_error("load_pair: " + record.bformat_path + " is not 3-channel");
    TrainingPair pair;
    pair.stereo = std::move(stereo);
    pair.bformat = BFormat(bf.sample_rate, std::move(bf.channels[0]), std::move(bf.channels[1]),
                           std::move(bf.channels[2]));
    pair.seed = record.seed;
    pair.crop_offset = record.crop_offset;
    pair.validate();
    (void)manifest;
    return pair;
}

}  // namespace ambiup
