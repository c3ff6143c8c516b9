#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oblab/error.hpp"
#include "oblab/field.hpp"

namespace oblab {

namespace fs = std::filesystem;

/// FNV-1a over a byte string, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_input, "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_bytes(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::format, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Writes `<stem>.json` (n, N, label, byte order, dtype, payload name) and the
/// raw little-endian doubles in `<stem>.bin`. Returns the sidecar path.
inline fs::path save_field(const ScalarField& f, const fs::path& sidecar) {
    static_assert(std::endian::native == std::endian::little, "field dumps assume a little-endian host");
    fs::path bin = sidecar;
    bin.replace_extension(".bin");
    const auto values = f.values();
    std::string payload(values.size() * sizeof(double), '\0');
    std::memcpy(payload.data(), values.data(), payload.size());
    write_bytes(bin, payload);
    nlohmann::json meta = {{"n", f.dim()},          {"N", f.spec().points}, {"label", f.label()},
                           {"byte_order", "little"}, {"dtype", "f64"},        {"payload", bin.filename().string()}};
    write_bytes(sidecar, meta.dump(2) + "\n");
    return sidecar;
}

inline ScalarField load_field(const fs::path& sidecar) {
    if (!fs::exists(sidecar)) throw Error(ErrorKind::missing_input, "missing field sidecar " + sidecar.string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_bytes(sidecar));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, sidecar.string() + ": " + e.what());
    }
    for (const char* key : {"n", "N", "byte_order", "dtype"})
        if (!meta.contains(key)) throw Error(ErrorKind::format, sidecar.string() + ": missing key '" + key + "'");
    if (meta["byte_order"] != "little" || meta["dtype"] != "f64")
        throw Error(ErrorKind::format, sidecar.string() + ": only little-endian f64 payloads are supported");
    GridSpec spec{meta["n"].get<int>(), meta["N"].get<int>()};
    spec.validate();
    fs::path bin = sidecar;
    bin.replace_extension(".bin");
    if (meta.contains("payload")) bin = sidecar.parent_path() / meta["payload"].get<std::string>();
    if (!fs::exists(bin)) throw Error(ErrorKind::missing_input, "missing field payload " + bin.string());
    const auto payload = read_bytes(bin);
    if (payload.size() != spec.size() * sizeof(double))
        throw Error(ErrorKind::format, bin.string() + ": expected " + std::to_string(spec.size() * sizeof(double)) +
                                           " bytes, found " + std::to_string(payload.size()));
    std::vector<double> values(spec.size());
    std::memcpy(values.data(), payload.data(), payload.size());
    return ScalarField(spec, std::move(values), meta.value("label", std::string{}));
}

}  // namespace oblab
