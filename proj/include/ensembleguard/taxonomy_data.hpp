#pragma once

// Generated from data/taxonomy/*.txt; tests check the two stay identical.

#include <string_view>

namespace ensembleguard::taxonomy_data {

inline constexpr std::string_view kNslKdd = R"TAXONOMY(# NSL-KDD attack taxonomy, version 1.
# Lines "@class Name = Display label" fix the class order (index 0 first).
# Lines "raw_label = ClassName" map dataset labels; matching ignores case,
# surrounding whitespace and a trailing '.'.
@dataset nsl-kdd
@version 1
@class Normal = Normal
@class DoS = DoS Attacks
@class Probing = Probing Attacks
@class Privilege = Privilege Attacks
@class AccessControl = Access Control Attacks

normal = Normal

# denial of service
back = DoS
land = DoS
neptune = DoS
pod = DoS
smurf = DoS
teardrop = DoS
apache2 = DoS
mailbomb = DoS
processtable = DoS
udpstorm = DoS

# probing
ipsweep = Probing
nmap = Probing
portsweep = Probing
satan = Probing
mscan = Probing
saint = Probing

# user to root
buffer_overflow = Privilege
loadmodule = Privilege
perl = Privilege
rootkit = Privilege
httptunnel = Privilege
ps = Privilege
sqlattack = Privilege
xterm = Privilege

# remote to local
ftp_write = AccessControl
guess_passwd = AccessControl
imap = AccessControl
multihop = AccessControl
phf = AccessControl
spy = AccessControl
warezclient = AccessControl
warezmaster = AccessControl
sendmail = AccessControl
named = AccessControl
snmpgetattack = AccessControl
snmpguess = AccessControl
xlock = AccessControl
xsnoop = AccessControl
worm = AccessControl
)TAXONOMY";

inline constexpr std::string_view kUnswNb15 = R"TAXONOMY(# UNSW-NB15 attack taxonomy, version 1 (attack_cat column).
@dataset unsw-nb15
@version 1
@class Normal = Normal
@class Generic = Generic Attacks
@class Exploits = Exploits Attacks
@class Fuzzers = Fuzzers Attacks
@class DoS = DoS Attacks
@class Reconnaissance = Reconnaissance Attacks
@class Analysis = Analysis Attacks
@class Backdoor = Backdoor Attacks
@class Shellcode = Shellcode Attacks
@class Worms = Worms Attacks

Normal = Normal
Generic = Generic
Exploits = Exploits
Fuzzers = Fuzzers
DoS = DoS
Reconnaissance = Reconnaissance
Analysis = Analysis
Backdoor = Backdoor
Backdoors = Backdoor
Shellcode = Shellcode
Worms = Worms
)TAXONOMY";

inline constexpr std::string_view kCicIds2017 = R"TAXONOMY(# CIC-IDS-2017 attack taxonomy, version 1.
# Non-ASCII dashes in labels (e.g. "Web Attack – XSS") are matched as '-'.
@dataset cic-ids-2017
@version 1
@class Benign = Benign
@class DoS = DoS Attacks
@class WebAttack = WebAttack Attacks
@class Botnet = Botnet Attacks
@class PortScan = PortScan Attacks
@class BruteForce = BruteForce Attacks
@class Infiltration = Infiltration Attacks

BENIGN = Benign

DoS Hulk = DoS
DoS GoldenEye = DoS
DoS slowloris = DoS
DoS Slowhttptest = DoS
DDoS = DoS
Heartbleed = DoS

Web Attack - Brute Force = WebAttack
Web Attack - XSS = WebAttack
Web Attack - Sql Injection = WebAttack

Bot = Botnet
PortScan = PortScan
FTP-Patator = BruteForce
SSH-Patator = BruteForce
Infiltration = Infiltration
)TAXONOMY";

}  // namespace ensembleguard::taxonomy_data
