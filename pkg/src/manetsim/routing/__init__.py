from .base import Packet, RoutingAgent, SendBuffer, CoreParams

__all__ = ["Packet", "RoutingAgent", "SendBuffer", "CoreParams"]
