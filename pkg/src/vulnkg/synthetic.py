"""Synthetic NVD JSON 1.1 feeds.

Generates CVE items whose descriptions follow the phrasing conventions of
NVD entries ("X in Vendor Product before 1.2.3 allows remote attackers to
..."), with CPE configurations and CWE problem types. Weakness classes are
correlated with product kinds and with outcome phrases so that entity
prediction has real signal. Every draw goes through one seeded
``random.Random``, so a seed fixes the feed byte for byte.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

# (vendor id, display name, [(product id, display name, kind, cpe part)])
CATALOG = [
    ("apache", "Apache", [("tomcat", "Tomcat", "server", "a"), ("http_server", "HTTP Server", "server", "a"),
                          ("struts", "Struts", "lib", "a"), ("activemq", "ActiveMQ", "server", "a"),
                          ("solr", "Solr", "server", "a"), ("airflow", "Airflow", "web", "a")]),
    ("microsoft", "Microsoft", [("windows_10", "Windows 10", "os", "o"), ("edge", "Edge", "client", "a"),
                                ("office", "Office", "client", "a"), ("exchange_server", "Exchange Server", "server", "a"),
                                ("sharepoint_server", "SharePoint Server", "web", "a")]),
    ("google", "Google", [("chrome", "Chrome", "client", "a"), ("android", "Android", "os", "o")]),
    ("mozilla", "Mozilla", [("firefox", "Firefox", "client", "a"), ("thunderbird", "Thunderbird", "client", "a")]),
    ("oracle", "Oracle", [("weblogic_server", "WebLogic Server", "server", "a"), ("mysql", "MySQL", "server", "a"),
                          ("java_se", "Java SE", "lib", "a")]),
    ("cisco", "Cisco", [("ios_xe", "IOS XE", "os", "o"), ("webex_meetings", "Webex Meetings", "client", "a"),
                        ("adaptive_security_appliance_software", "Adaptive Security Appliance Software", "os", "o")]),
    ("wordpress", "WordPress", [("wordpress", "WordPress", "web", "a")]),
    ("drupal", "Drupal", [("drupal", "Drupal", "web", "a")]),
    ("joomla", "Joomla", [("joomla\\!", "Joomla!", "web", "a")]),
    ("php", "PHP", [("php", "PHP", "lib", "a")]),
    ("openssl", "OpenSSL", [("openssl", "OpenSSL", "lib", "a")]),
    ("linux", "Linux", [("linux_kernel", "Linux kernel", "os", "o")]),
    ("gitlab", "GitLab", [("gitlab", "GitLab", "web", "a")]),
    ("jenkins", "Jenkins", [("jenkins", "Jenkins", "web", "a")]),
    ("atlassian", "Atlassian", [("jira_server", "Jira Server", "web", "a"), ("confluence_server", "Confluence Server", "web", "a")]),
    ("vmware", "VMware", [("vcenter_server", "vCenter Server", "server", "a"), ("esxi", "ESXi", "os", "o")]),
    ("adobe", "Adobe", [("acrobat_reader", "Acrobat Reader", "client", "a"), ("flash_player", "Flash Player", "client", "a")]),
    ("imagemagick", "ImageMagick", [("imagemagick", "ImageMagick", "lib", "a")]),
    ("ffmpeg", "FFmpeg", [("ffmpeg", "FFmpeg", "lib", "a")]),
    ("libtiff", "LibTIFF", [("libtiff", "LibTIFF", "lib", "a")]),
    ("phpmyadmin", "phpMyAdmin", [("phpmyadmin", "phpMyAdmin", "web", "a")]),
    ("nginx", "nginx", [("nginx", "nginx", "server", "a")]),
    ("redhat", "Red Hat", [("enterprise_linux", "Enterprise Linux", "os", "o"), ("keycloak", "Keycloak", "web", "a")]),
    ("ibm", "IBM", [("websphere_application_server", "WebSphere Application Server", "server", "a"),
                    ("db2", "Db2", "server", "a")]),
    ("sap", "SAP", [("netweaver", "NetWeaver", "server", "a")]),
    ("fortinet", "Fortinet", [("fortios", "FortiOS", "os", "o")]),
    ("zoho", "Zoho", [("manageengine_servicedesk_plus", "ManageEngine ServiceDesk Plus", "web", "a")]),
    ("tp-link", "TP-Link", [("archer_c7", "Archer C7", "device", "h")]),
    ("d-link", "D-Link", [("dir-615", "DIR-615", "device", "h")]),
    ("netgear", "NETGEAR", [("r7000", "R7000", "device", "h")]),
    ("gnu", "GNU", [("glibc", "glibc", "lib", "a"), ("bash", "Bash", "lib", "a")]),
    ("python", "Python", [("python", "Python", "lib", "a")]),
    ("nodejs", "Node.js", [("node.js", "Node.js", "lib", "a")]),
    ("elastic", "Elastic", [("kibana", "Kibana", "web", "a"), ("elasticsearch", "Elasticsearch", "server", "a")]),
    ("grafana", "Grafana", [("grafana", "Grafana", "web", "a")]),
    ("moodle", "Moodle", [("moodle", "Moodle", "web", "a")]),
    ("limesurvey", "LimeSurvey", [("limesurvey", "LimeSurvey", "web", "a")]),
]

_SYLLABLES = ("zen", "tri", "kor", "vel", "nex", "qua", "bor", "lum", "sta", "dri", "mo", "xa",
              "tel", "ori", "pha", "cy", "ran", "vo", "ka", "li", "sor", "tek", "gal", "ux")
_PRODUCT_SUFFIXES = {
    "web": ("CMS", "Portal", "Forum", "Helpdesk", "Wiki", "Shop", "Gallery", "Blog", "LMS", "CRM"),
    "server": ("Server", "Gateway", "Proxy", "Broker", "Directory", "Mail Server"),
    "lib": ("Lib", "Parser", "SDK", "Toolkit", "Codec", "Engine"),
    "client": ("Reader", "Viewer", "Player", "Browser", "Client", "Editor"),
    "os": ("OS", "Firmware", "RTOS"),
    "device": ("Router", "Camera", "NAS", "Switch"),
}
_KIND_PART = {"web": "a", "server": "a", "lib": "a", "client": "a", "os": "o", "device": "h"}

COMPONENTS = {
    "web": ("the login page", "the admin panel", "the search function", "index.php", "admin/settings.php",
            "the user profile page", "the comment form", "the file manager", "the REST API", "the import feature"),
    "server": ("the request handler", "the management console", "the authentication module", "the proxy module",
               "the HTTP/2 implementation", "the session manager", "the configuration interface"),
    "lib": ("the decoder", "the parser", "the image loader", "the compression routine", "the TLS handshake code",
            "the font renderer", "the XML reader"),
    "client": ("the JavaScript engine", "the PDF renderer", "the media player", "the rendering engine",
               "the extension manager", "the print spooler"),
    "os": ("the kernel", "the network stack", "the USB driver", "the file system driver", "the netfilter subsystem"),
    "device": ("the web management interface", "the UPnP service", "the firmware update feature", "the telnet service"),
}
PARAMS = ("id", "name", "page", "file", "url", "q", "user", "redirect", "path", "sort", "token", "lang", "cmd")
FILE_TYPES = ("image", "PDF", "font", "video", "archive", "TIFF", "PNG", "JPEG", "MP4", "XML")

# (weight, kinds, templates). Templates use {prod}, {ver}, {comp}, {param}, {file}.
WEAKNESSES = {
    "CWE-79": (14, ("web", "server"), (
        "Cross-site scripting (XSS) vulnerability in {comp} in {prod} {ver} allows remote attackers to inject arbitrary web script or HTML via the {param} parameter.",
        "{prod} {ver} is vulnerable to stored XSS in {comp}, which allows authenticated attackers to inject arbitrary web script via a crafted {param} value.",
        "A reflected cross-site scripting issue in {prod} {ver} allows remote attackers to inject arbitrary web script or HTML via the {param} parameter to {comp}.",
    )),
    "CWE-89": (9, ("web",), (
        "SQL injection vulnerability in {comp} in {prod} {ver} allows remote attackers to execute arbitrary SQL commands via the {param} parameter.",
        "{prod} {ver} allows SQL injection via the {param} parameter in {comp}, which lets remote authenticated users execute arbitrary SQL commands.",
    )),
    "CWE-787": (8, ("lib", "client", "os"), (
        "An out-of-bounds write in {comp} in {prod} {ver} allows remote attackers to execute arbitrary code via a crafted {file} file.",
        "Heap-based buffer overflow in {comp} in {prod} {ver} allows attackers to cause a denial of service or execute arbitrary code via a crafted {file} file.",
    )),
    "CWE-119": (6, ("lib", "client", "device"), (
        "Buffer overflow in {comp} in {prod} {ver} allows remote attackers to execute arbitrary code or cause a denial of service via a long {param} argument.",
        "Stack-based buffer overflow in {prod} {ver} allows remote attackers to execute arbitrary code via a crafted request to {comp}.",
    )),
    "CWE-20": (6, ("server", "os", "device", "lib"), (
        "Improper input validation in {comp} in {prod} {ver} allows remote attackers to cause a denial of service via a crafted packet.",
        "{prod} {ver} does not properly validate input to {comp}, which allows remote attackers to bypass intended access restrictions via a crafted request.",
    )),
    "CWE-125": (5, ("lib", "client"), (
        "Out-of-bounds read in {comp} in {prod} {ver} allows remote attackers to obtain sensitive information or cause a denial of service via a crafted {file} file.",
        "{prod} {ver} has a buffer over-read in {comp}, which allows attackers to cause a denial of service (application crash) via a crafted {file} file.",
    )),
    "CWE-22": (5, ("web", "server", "device"), (
        "Directory traversal vulnerability in {comp} in {prod} {ver} allows remote attackers to read arbitrary files via a .. (dot dot) in the {param} parameter.",
        "A path traversal issue in {prod} {ver} allows remote attackers to read arbitrary files via a crafted {param} parameter to {comp}.",
    )),
    "CWE-352": (4, ("web",), (
        "Cross-site request forgery (CSRF) vulnerability in {comp} in {prod} {ver} allows remote attackers to hijack the authentication of administrators for requests that change settings.",
        "{prod} {ver} lacks CSRF protection in {comp}, which allows remote attackers to hijack the authentication of users.",
    )),
    "CWE-416": (5, ("client", "os", "lib"), (
        "Use-after-free vulnerability in {comp} in {prod} {ver} allows remote attackers to execute arbitrary code via a crafted web page.",
        "A use-after-free in {comp} in {prod} {ver} allows local users to gain privileges via a crafted application.",
    )),
    "CWE-78": (4, ("device", "web", "server"), (
        "{prod} {ver} allows remote authenticated users to execute arbitrary commands via shell metacharacters in the {param} parameter to {comp}.",
        "OS command injection in {comp} in {prod} {ver} allows remote attackers to execute arbitrary OS commands via the {param} parameter.",
    )),
    "CWE-200": (4, ("server", "web", "os"), (
        "{prod} {ver} allows remote attackers to obtain sensitive information via a direct request to {comp}.",
        "An information disclosure issue in {comp} in {prod} {ver} allows remote attackers to obtain sensitive information by reading error messages.",
    )),
    "CWE-400": (3, ("server", "lib"), (
        "{prod} {ver} allows remote attackers to cause a denial of service (resource consumption) via a large number of requests to {comp}.",
        "Uncontrolled resource consumption in {comp} in {prod} {ver} allows remote attackers to cause a denial of service (CPU consumption) via a crafted request.",
    )),
    "CWE-287": (3, ("web", "server", "device"), (
        "{prod} {ver} allows remote attackers to bypass authentication via a crafted request to {comp}.",
        "Improper authentication in {comp} in {prod} {ver} allows remote attackers to bypass authentication and gain administrative access.",
    )),
    "CWE-476": (3, ("lib", "os"), (
        "NULL pointer dereference in {comp} in {prod} {ver} allows remote attackers to cause a denial of service (crash) via a crafted {file} file.",
        "{prod} {ver} has a NULL pointer dereference in {comp}, which allows local users to cause a denial of service.",
    )),
    "CWE-434": (3, ("web",), (
        "Unrestricted file upload vulnerability in {comp} in {prod} {ver} allows remote authenticated users to execute arbitrary code by uploading a file with an executable extension.",
    )),
    "CWE-502": (3, ("server", "lib", "web"), (
        "Deserialization of untrusted data in {comp} in {prod} {ver} allows remote attackers to execute arbitrary code via a crafted serialized object.",
    )),
    "CWE-269": (2, ("os",), (
        "{prod} {ver} allows local users to gain privileges via a crafted call to {comp}.",
        "An elevation of privilege vulnerability in {comp} in {prod} {ver} allows local users to gain root privileges.",
    )),
    "CWE-611": (2, ("lib", "server", "web"), (
        "XML external entity (XXE) vulnerability in {comp} in {prod} {ver} allows remote attackers to read arbitrary files via a crafted XML document.",
    )),
    "CWE-918": (2, ("web", "server"), (
        "Server-side request forgery (SSRF) in {comp} in {prod} {ver} allows remote attackers to send crafted requests to internal services via the {param} parameter.",
    )),
    "CWE-190": (2, ("lib", "os"), (
        "Integer overflow in {comp} in {prod} {ver} allows remote attackers to cause a denial of service or possibly execute arbitrary code via a crafted {file} file.",
    )),
    "CWE-601": (2, ("web",), (
        "Open redirect vulnerability in {comp} in {prod} {ver} allows remote attackers to redirect users to arbitrary web sites and conduct phishing attacks via the {param} parameter.",
    )),
    "CWE-362": (1, ("os",), (
        "Race condition in {comp} in {prod} {ver} allows local users to gain privileges or cause a denial of service.",
    )),
}


@dataclass(frozen=True)
class Product:
    vendor_id: str
    vendor_name: str
    product_id: str
    product_name: str
    kind: str
    part: str


def _invented_products(rng: random.Random, n: int) -> list[Product]:
    out, seen = [], set()
    kinds = list(_PRODUCT_SUFFIXES)
    while len(out) < n:
        vendor = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3))).capitalize()
        kind = rng.choice(kinds)
        base = "".join(rng.choice(_SYLLABLES) for _ in range(2)).capitalize()
        name = f"{base} {rng.choice(_PRODUCT_SUFFIXES[kind])}"
        if vendor.lower() in seen or name.lower() in seen:
            continue
        seen.update({vendor.lower(), name.lower()})
        out.append(Product(vendor.lower(), vendor, name.lower().replace(" ", "_"), name, kind, _KIND_PART[kind]))
    return out


def product_pool(seed: int = 0, n_invented: int = 150) -> list[Product]:
    pool = [Product(v, vn, p, pn, kind, part) for v, vn, prods in CATALOG for p, pn, kind, part in prods]
    return pool + _invented_products(random.Random(seed ^ 0x5EED), n_invented)


def _version(rng: random.Random) -> str:
    parts = [str(rng.randint(0, 12)), str(rng.randint(0, 20))]
    if rng.random() < 0.75:
        parts.append(str(rng.randint(0, 30)))
    return ".".join(parts)


def _version_phrase(rng: random.Random) -> tuple[str, list[str]]:
    """Version wording and the versions listed in the CPE configuration."""
    v = _version(rng)
    major = v.split(".")[0]
    style = rng.random()
    if style < 0.35:
        return f"before {v}", [_predecessor(v)]
    if style < 0.5:
        return f"{v} and earlier", [v]
    if style < 0.62:
        return f"through {v}", [v]
    if style < 0.72:
        lo = f"{major}.0"
        return f"{lo} through {v}", [lo, v]
    if style < 0.8:
        return f"versions prior to {v}", [_predecessor(v)]
    if style < 0.87:
        return f"{major}.x before {v}", [_predecessor(v)]
    if style < 0.94:
        return v, [v]
    return "", ["*"]


def _predecessor(v: str) -> str:
    parts = v.split(".")
    last = int(parts[-1])
    parts[-1] = str(last - 1) if last > 0 else "0"
    return ".".join(parts)


def _display(prod: Product, rng: random.Random) -> str:
    if prod.vendor_name.lower() == prod.product_name.lower() or prod.product_name.lower().startswith(prod.vendor_name.lower()):
        return prod.product_name
    return f"{prod.vendor_name} {prod.product_name}" if rng.random() < 0.7 else prod.product_name


def _pick_weakness(rng: random.Random, kind: str) -> str:
    names = list(WEAKNESSES)
    weights = [WEAKNESSES[c][0] * (4.0 if kind in WEAKNESSES[c][1] else 0.25) for c in names]
    return rng.choices(names, weights)[0]


def _cpe_uri(prod: Product, version: str) -> str:
    return f"cpe:2.3:{prod.part}:{prod.vendor_id}:{prod.product_id}:{version}:*:*:*:*:*:*:*"


def generate_items(n: int, seed: int = 0, years=(2003, 2022), n_invented: int = 150,
                   start_serial: int = 1000) -> list[dict]:
    rng = random.Random(seed)
    pool = product_pool(seed, n_invented)
    weights = [3.0 if i < sum(len(p) for _, _, p in CATALOG) else 1.0 for i in range(len(pool))]
    serial = {y: start_serial for y in range(years[0], years[1] + 1)}
    items = []
    for _ in range(n):
        year = rng.randint(*years)
        serial[year] += rng.randint(1, 7)
        cve_id = f"CVE-{year}-{serial[year]:04d}"
        prod = rng.choices(pool, weights)[0]
        cwe = _pick_weakness(rng, prod.kind)
        template = rng.choice(WEAKNESSES[cwe][2])
        ver_text, cpe_versions = _version_phrase(rng)
        text = template.format(
            prod=_display(prod, rng), ver=ver_text, comp=rng.choice(COMPONENTS[prod.kind]),
            param=rng.choice(PARAMS), file=rng.choice(FILE_TYPES),
        )
        text = " ".join(text.split())
        text = text[0].upper() + text[1:]
        uris = [_cpe_uri(prod, v) for v in cpe_versions]
        # a second affected product, mentioned as "as used in"
        if rng.random() < 0.12:
            other = rng.choices(pool, weights)[0]
            if other != prod:
                text = text.rstrip(".") + f", as used in {_display(other, rng)}."
                uris.append(_cpe_uri(other, "*"))
        has_cpe = rng.random() > 0.08
        cwe_value = cwe if rng.random() > 0.07 else rng.choice(["NVD-CWE-Other", "NVD-CWE-noinfo"])
        items.append(_item(cve_id, text, [cwe_value], uris if has_cpe else [], year))
    return items


def _item(cve_id: str, description: str, cwe_values: list[str], cpe_uris: list[str], year: int) -> dict:
    return {
        "cve": {
            "data_type": "CVE",
            "data_format": "MITRE",
            "data_version": "4.0",
            "CVE_data_meta": {"ID": cve_id, "ASSIGNER": "cve@mitre.org"},
            "problemtype": {"problemtype_data": [{"description": [{"lang": "en", "value": v} for v in cwe_values]}]},
            "references": {"reference_data": []},
            "description": {"description_data": [{"lang": "en", "value": description}]},
        },
        "configurations": {
            "CVE_data_version": "4.0",
            "nodes": [{"operator": "OR", "children": [],
                       "cpe_match": [{"vulnerable": True, "cpe23Uri": u, "cpe_name": []} for u in cpe_uris]}]
            if cpe_uris else [],
        },
        "impact": {},
        "publishedDate": f"{year}-06-01T00:00Z",
        "lastModifiedDate": f"{year}-06-01T00:00Z",
    }


def make_feed(items: list[dict]) -> dict:
    return {
        "CVE_data_type": "CVE",
        "CVE_data_format": "MITRE",
        "CVE_data_version": "4.0",
        "CVE_data_numberOfCVEs": str(len(items)),
        "CVE_data_timestamp": "2023-01-01T00:00Z",
        "CVE_Items": items,
    }


def write_feed(path: str | Path, n: int, seed: int = 0, **kwargs) -> Path:
    path = Path(path)
    path.write_text(json.dumps(make_feed(generate_items(n, seed, **kwargs)), indent=1), encoding="utf-8")
    return path
