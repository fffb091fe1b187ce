#include "tilted/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "tilted/bytes.hpp"
#include "tilted/errors.hpp"

namespace tilted {

namespace {

constexpr std::uint32_t kMagic = 0x44544c54;  // "TLTD"

void write_volume(std::vector<std::uint8_t>& out, const FactoredVolume& volume) {
  const auto& spec = volume.spec();
  append_le(out, kMagic);
  append_le(out, kCheckpointVersion);
  append_le(out, static_cast<std::uint32_t>(spec.kind));
  append_le(out, static_cast<std::uint32_t>(spec.boundary));
  append_le(out, static_cast<std::int32_t>(spec.channels));
  append_le(out, static_cast<std::int32_t>(spec.transforms));
  append_le(out, static_cast<std::uint32_t>(spec.levels.size()));
  for (const auto& level : spec.levels) {
    append_le(out, level.scale);
    for (int s : level.sizes) append_le(out, static_cast<std::int32_t>(s));
  }
  append_le(out, static_cast<std::uint64_t>(volume.parameter_count()));
  for (double v : volume.parameters()) append_le(out, static_cast<float>(v));
  const auto& tf = volume.transforms();
  append_le(out, static_cast<std::uint32_t>(tf.dim()));
  append_le(out, static_cast<std::uint32_t>(tf.size()));
  if (tf.planar()) {
    for (const auto& r : tf.planar_rotations()) append_le(out, r);
  } else {
    for (const auto& q : tf.spatial_rotations()) append_le(out, q);
  }
}

FactoredVolume read_volume(ByteReader& in) {
  if (in.read<std::uint32_t>() != kMagic) throw StructuralError("checkpoint: bad magic");
  const auto version = in.read<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw StructuralError("checkpoint: unsupported version " + std::to_string(version));
  }
  DecompositionSpec spec;
  const auto kind = in.read<std::uint32_t>();
  const auto boundary = in.read<std::uint32_t>();
  if (kind > 3 || boundary > 1) throw StructuralError("checkpoint: bad spec enum");
  spec.kind = static_cast<DecompositionKind>(kind);
  spec.boundary = static_cast<BoundaryMode>(boundary);
  spec.channels = in.read<std::int32_t>();
  spec.transforms = in.read<std::int32_t>();
  const auto levels = in.read<std::uint32_t>();
  if (levels > 64) throw StructuralError("checkpoint: implausible level count");
  for (std::uint32_t r = 0; r < levels; ++r) {
    ResolutionLevel level;
    level.scale = in.read<double>();
    for (int& s : level.sizes) s = in.read<std::int32_t>();
    spec.levels.push_back(level);
  }
  spec.validate();
  const auto count = in.read<std::uint64_t>();
  std::vector<double> values(count);
  for (auto& v : values) v = in.read<float>();
  const auto dim = in.read<std::uint32_t>();
  const auto T = in.read<std::uint32_t>();
  if (static_cast<int>(T) != spec.transforms) throw StructuralError("checkpoint: transform count mismatch");
  TransformSet tf;
  if (dim == 2) {
    std::vector<UnitRotation2> r(T);
    for (auto& x : r) x = read_rotation2_le(in.take(16));
    tf = TransformSet(std::move(r));
  } else if (dim == 3) {
    std::vector<UnitQuaternion> q(T);
    for (auto& x : q) x = read_quaternion_le(in.take(32));
    tf = TransformSet(std::move(q));
  } else {
    throw StructuralError("checkpoint: bad transform dimension");
  }
  FactoredVolume volume(spec, std::move(tf));
  if (count != volume.parameter_count()) throw StructuralError("checkpoint: parameter count mismatch");
  std::copy(values.begin(), values.end(), volume.parameters().begin());
  return volume;
}

}  // namespace

std::vector<std::uint8_t> serialize_volume(const FactoredVolume& volume) {
  std::vector<std::uint8_t> out;
  write_volume(out, volume);
  return out;
}

FactoredVolume deserialize_volume(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  auto v = read_volume(in);
  if (!in.done()) throw StructuralError("checkpoint: trailing bytes");
  return v;
}

std::vector<std::uint8_t> serialize_field(const HybridField& field) {
  std::vector<std::uint8_t> out;
  write_volume(out, field.volume);
  append_le(out, static_cast<std::int32_t>(field.encoding.frequencies));
  append_le(out, static_cast<std::uint8_t>(field.encoding.include_identity));
  append_le(out, static_cast<std::uint8_t>(field.contract_input));
  append_le(out, static_cast<std::uint8_t>(field.learn_transforms));
  append_le(out, static_cast<std::uint8_t>(field.decoder.output_activation()));
  append_le(out, static_cast<std::int64_t>(field.lowpass.ramp_steps));
  append_le(out, field.lowpass.eta_start);
  const auto& sizes = field.decoder.layer_sizes();
  append_le(out, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) append_le(out, static_cast<std::int32_t>(s));
  for (double v : field.decoder.parameters()) append_le(out, static_cast<float>(v));
  return out;
}

HybridField deserialize_field(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  HybridField field;
  field.volume = read_volume(in);
  field.encoding.frequencies = in.read<std::int32_t>();
  field.encoding.include_identity = in.read<std::uint8_t>() != 0;
  field.contract_input = in.read<std::uint8_t>() != 0;
  field.learn_transforms = in.read<std::uint8_t>() != 0;
  const auto act = in.read<std::uint8_t>();
  if (act > 1) throw StructuralError("checkpoint: bad output activation");
  field.lowpass.frequencies = field.encoding.frequencies;
  field.lowpass.ramp_steps = in.read<std::int64_t>();
  field.lowpass.eta_start = in.read<double>();
  const auto layers = in.read<std::uint32_t>();
  if (layers < 2 || layers > 64) throw StructuralError("checkpoint: bad decoder depth");
  std::vector<int> sizes(layers);
  for (int& s : sizes) s = in.read<std::int32_t>();
  field.decoder = Mlp(sizes, static_cast<OutputActivation>(act));
  if (sizes.front() != field.encoding.output_dim(field.volume.spec().latent_dim())) {
    throw StructuralError("checkpoint: decoder input does not match encoded latent");
  }
  for (double& v : field.decoder.parameters()) v = in.read<float>();
  if (!in.done()) throw StructuralError("checkpoint: trailing bytes");
  return field;
}

void save_checkpoint(const std::filesystem::path& path, const HybridField& field) {
  const auto bytes = serialize_field(field);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

HybridField load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_field(bytes);
}

}  // namespace tilted
