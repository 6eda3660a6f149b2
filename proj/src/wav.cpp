#include "ambiup/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ambiup {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_wav: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t size = bytes.size();

    if (size < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        throw std::runtime_error("read_wav: not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t off = 12;
    while (off + 8 <= size) {
        const char* id = reinterpret_cast<const char*>(p + off);
        const std::uint32_t chunk_len = read_u32(p + off + 4);
        const std::size_t body = off + 8;
        if (body + chunk_len > size) break;
        if (std::memcmp(id, "fmt ", 4) == 0 && chunk_len >= 16) {
            format = read_u16(p + body);
            channels = read_u16(p + body + 2);
            rate = read_u32(p + body + 4);
            bits = read_u16(p + body + 14);
            if (format == kFormatExtensible && chunk_len >= 40) {
                format = read_u16(p + body + 24);  // first two bytes of SubFormat GUID
            }
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = p + body;
            data_len = chunk_len;
        }
        off = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }

    if (!have_fmt || data == nullptr) throw std::runtime_error("read_wav: missing fmt/data chunk: " + path);
    if (channels == 0 || rate == 0) throw std::runtime_error("read_wav: malformed fmt chunk: " + path);

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool pcm24 = format == kFormatPcm && bits == 24;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !pcm24 && !f32)
        throw std::runtime_error("read_wav: unsupported format (need PCM16/PCM24/float32): " + path);

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_size = bytes_per_sample * channels;
    const std::size_t frames = data_len / frame_size;

    AudioBuffer out;
    out.sample_rate = static_cast<int>(rate);
    out.channels.assign(channels, std::vector<double>(frames));
    for (std::size_t i = 0; i < frames; ++i) {
        const unsigned char* fp = data + i * frame_size;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const unsigned char* sp = fp + c * bytes_per_sample;
            double v = 0.0;
            if (pcm16) {
                const auto s = static_cast<std::int16_t>(sp[0] | (sp[1] << 8));
                v = static_cast<double>(s) / 32768.0;
            } else if (pcm24) {
                std::int32_t s = sp[0] | (sp[1] << 8) | (sp[2] << 16);
                if (s & 0x800000) s |= ~0xFFFFFF;  // sign extend
                v = static_cast<double>(s) / 8388608.0;
            } else {
                float fval;
                std::memcpy(&fval, sp, 4);
                v = static_cast<double>(fval);
            }
            out.channels[c][i] = v;
        }
    }
    out.validate();
    return out;
}

void write_wav(const std::string& path, const AudioBuffer& audio) {
    audio.validate();
    const std::uint16_t channels = static_cast<std::uint16_t>(audio.num_channels());
    const std::uint32_t frames = static_cast<std::uint32_t>(audio.num_samples());
    const std::uint32_t data_len = frames * channels * 4;

    std::string out;
    out.reserve(58 + data_len);
    out.append("RIFF");
    put_u32(out, 50 + data_len);  // everything after this length field
    out.append("WAVE");

    out.append("fmt ");
    put_u32(out, 16);
    put_u16(out, kFormatFloat);
    put_u16(out, channels);
    put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * channels * 4);
    put_u16(out, static_cast<std::uint16_t>(channels * 4));
    put_u16(out, 32);

    out.append("fact");
    put_u32(out, 4);
    put_u32(out, frames);

    out.append("data");
    put_u32(out, data_len);
    for (std::uint32_t i = 0; i < frames; ++i) {
        for (std::uint16_t c = 0; c < channels; ++c) {
            const float v = static_cast<float>(audio.channels[c][i]);
            char buf[4];
            std::memcpy(buf, &v, 4);
            out.append(buf, 4);
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_wav: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_wav: short write to " + path);
}

}  // namespace ambiup
