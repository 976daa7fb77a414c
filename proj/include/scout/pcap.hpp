#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scout/chunking.hpp"
#include "scout/common.hpp"

namespace scout {

// ---- DNS -------------------------------------------------------------------

struct DnsQuestion {
  std::string name;
  std::uint16_t qtype = 0;
  bool operator==(const DnsQuestion&) const = default;
};

struct DnsAnswer {
  std::string name;
  std::uint16_t rtype = 0;
  std::string rdata_text;
  bool operator==(const DnsAnswer&) const = default;
};

struct DnsMessage {
  std::uint16_t id = 0;
  bool is_response = false;
  std::vector<DnsQuestion> questions;
  std::vector<DnsAnswer> answers;
  bool operator==(const DnsMessage&) const = default;
};

/// nullopt means NotDns. Compression pointers are followed with a visited
/// set; loops and out-of-range offsets reject the whole message.
std::optional<DnsMessage> decode_dns(ByteView payload);

/// Reads a possibly-compressed name at `offset`. On success advances
/// `offset` past the name as it appears in place.
std::optional<std::string> read_dns_name(ByteView msg, std::size_t& offset);

std::string dns_type_name(std::uint16_t type);

// ---- packet layers ---------------------------------------------------------

struct EthernetLayer {
  std::string src_mac;
  std::string dst_mac;
  std::uint16_t ethertype = 0;
  bool operator==(const EthernetLayer&) const = default;
};

struct IpLayer {
  int version = 4;
  std::string src_addr;
  std::string dst_addr;
  std::uint8_t protocol = 0;
  bool operator==(const IpLayer&) const = default;
};

enum class TransportKind { Tcp, Udp, Icmp };

struct TransportLayer {
  TransportKind kind = TransportKind::Udp;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  std::optional<std::uint8_t> icmp_type;
  std::optional<std::uint8_t> icmp_code;
  bool operator==(const TransportLayer&) const = default;
};

struct DecodedLayers {
  std::optional<EthernetLayer> eth;
  std::optional<IpLayer> ip;
  std::optional<TransportLayer> transport;
  std::optional<DnsMessage> dns;
  std::optional<std::string> raw_note;
  bool operator==(const DecodedLayers&) const = default;
};

inline constexpr std::uint32_t kLinkTypeEthernet = 1;

/// Best-effort decode. Never throws; a failing layer leaves deeper layers
/// absent and explains itself in raw_note.
DecodedLayers decode_packet(std::uint32_t link_type, ByteView payload);

std::string icmp_type_name(std::uint8_t type);
std::string icmp_code_name(std::uint8_t type, std::uint8_t code);

// ---- capture file ----------------------------------------------------------

enum class ByteOrder { LE, BE };
enum class TsResolution { Micro, Nano };

struct PcapPacket {
  std::size_t index = 0;  // 1-based
  std::uint32_t ts_sec = 0;
  std::uint32_t ts_frac = 0;
  std::uint32_t captured_len = 0;
  std::uint32_t original_len = 0;
  DecodedLayers layers;
  bool operator==(const PcapPacket&) const = default;
};

struct PcapFile {
  ByteOrder byte_order = ByteOrder::LE;
  TsResolution ts_resolution = TsResolution::Micro;
  std::uint16_t version_major = 2;
  std::uint16_t version_minor = 4;
  std::uint32_t link_type = kLinkTypeEthernet;
  std::vector<PcapPacket> packets;
  std::optional<std::string> truncation_note;
  bool operator==(const PcapFile&) const = default;
};

/// Classic libpcap savefile. Throws Error(BadMagic | UnsupportedVersion |
/// TruncatedGlobalHeader); a truncated trailing record is dropped with a note.
PcapFile parse_pcap(ByteView bytes);

/// `#<index> <ts> <src>-><dst> <proto> <summary>` without trailing newline.
std::string render_packet_line(const PcapPacket& packet, TsResolution res);

/// One line per packet, packed greedily into chunks within `budget` tokens.
/// Chunk first/last hold the 1-based packet index range.
std::vector<TextChunk> render_packets(const PcapFile& pcap, std::size_t budget);

}  // namespace scout
